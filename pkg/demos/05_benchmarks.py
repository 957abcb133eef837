"""Throughput benchmarks with oracle cross-checks.

Each suite times the accelerated path and reports its worst deviation
against the exhaustive reference on a verified subsample, so a single run
doubles as an installation self-check.
"""

from terrainkit.bench import format_table, run_bench

reports = []
reports += run_bench("depth", [(36, 18), (64, 36)], repeats=5)
reports += run_bench("raycast", [10_000], repeats=5)
reports += run_bench("penetration", [100_000, 1_000_000], repeats=5)

print(format_table(reports))
print()
for report in reports:
    print(report.to_json_line())

frame = next(r for r in reports if r.operation == "render+fsim")
budget_ms = 1000.0 / 60.0
print(f"\n36x18 frame: {frame.wall_time_s * 1e3:.2f} ms against the {budget_ms:.1f} ms sensor budget")
