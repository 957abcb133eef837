/**
 * End-to-end tests against a live `terrainkit serve` subprocess.
 *
 * Fidelity tests share fixtures with the CLI: results coming back over the
 * wire must equal what the CLI computes on the same inputs bitwise (after
 * float32 rounding, which both sides apply at the boundary).
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TerrainClient, type Session } from "../src/client.js";

const PYTHON = process.env.TERRAINKIT_PYTHON ?? "python3";

function cli(...args: string[]): string {
  return execFileSync(PYTHON, ["-m", "terrainkit.cli", ...args], { encoding: "utf-8" });
}

function parseCsv(text: string): string[][] {
  return text
    .trim()
    .split("\n")
    .slice(1)
    .map((line) => line.split(","));
}

let dir: string;
let client: TerrainClient;
let stairsPath: string;
let flatPath: string;

beforeAll(async () => {
  dir = mkdtempSync(join(tmpdir(), "terrainkit-client-"));
  stairsPath = join(dir, "stairs.obj");
  flatPath = join(dir, "flat.obj");
  cli("terrain", "--kind", "stairs", "--out", stairsPath);
  cli("terrain", "--kind", "flat", "--out", flatPath);
  client = await TerrainClient.start();
}, 60_000);

afterAll(async () => {
  await client?.shutdown();
});

describe("protocol", () => {
  it("reports the versioned ABI string", async () => {
    const { abi } = await client.abiVersion();
    expect(abi).toBe("terrainkit-abi-1");
  });

  it("rejects wrong dtypes instead of converting", async () => {
    const session = await client.createSession({ meshPath: stairsPath });
    const poses64 = new Float64Array(7);
    // @ts-expect-error deliberately wrong dtype
    await expect(async () => session.penetration(poses64, new Float32Array(6))).rejects.toThrow(TypeError);
    await session.destroy();
  });

  it("propagates core validation errors with messages intact", async () => {
    const vertices = new Float32Array(9);
    const faces = new Uint32Array([0, 1, 7]);
    await expect(client.createSession({ vertices, faces })).rejects.toThrow(/out of range/);
  });
});

describe("session creation", () => {
  it("builds stairs sessions with detected edges", async () => {
    const session = await client.createSession({ meshPath: stairsPath });
    expect(session.info.numEdges).toBeGreaterThan(0);
    await session.destroy();
  });

  it("accepts raw vertex/face arrays", async () => {
    // a unit square sheet, two triangles
    const vertices = new Float32Array([0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0]);
    const faces = new Uint32Array([0, 1, 2, 0, 2, 3]);
    const session = await client.createSession({ vertices, faces });
    expect(session.info.numFaces).toBe(2);
    expect(session.info.numEdges).toBe(0);
    await session.destroy();
  });

  it("produces identical patch sets for the same seed", async () => {
    const patchConfig = { radius: 0.1, max_height_diff: 0.05, n_targets: 6, seed: 33 };
    const a = await client.createSession({ meshPath: stairsPath }, { patchConfig });
    const b = await client.createSession({ meshPath: stairsPath }, { patchConfig });
    expect(a.info.numPatches).toBe(6);
    expect(Buffer.from(a.info.patches.buffer, a.info.patches.byteOffset, 72)).toEqual(
      Buffer.from(b.info.patches.buffer, b.info.patches.byteOffset, 72),
    );
    await a.destroy();
    await b.destroy();
  });
});

describe("batch penetration", () => {
  let session: Session;

  beforeAll(async () => {
    session = await client.createSession({ meshPath: stairsPath });
  });

  afterAll(async () => {
    await session.destroy();
  });

  it("returns zeros far from every edge", async () => {
    const poses = new Float32Array([-3, 0, 1, 1, 0, 0, 0]);
    const twists = new Float32Array(6);
    const { rvol, offsets } = await session.penetration(poses, twists);
    expect(rvol[0]).toBe(0);
    expect(offsets.every((v) => v === 0)).toBe(true);
  });

  it("matches the CLI penalty output on the same row", async () => {
    // all coordinates chosen exactly representable in float32
    const pose = [1.25, 0, 0.3125, 1, 0, 0, 0];
    const twist = [0.5, 0, 0, 0, 0, 0];
    const edges = join(dir, "edges.json");
    cli("edges", "--mesh", stairsPath, "--out", edges);
    const traj = join(dir, "traj.csv");
    writeFileSync(traj, `0,${pose.join(",")},${twist.join(",")}\n`);
    const out = join(dir, "pen.csv");
    cli("penalty", "--mesh", stairsPath, "--edges", edges, "--traj", traj, "--out", out);
    const cliRvol = Number(parseCsv(readFileSync(out, "utf-8"))[0][1]);

    const { rvol } = await session.penetration(new Float32Array(pose), new Float32Array(twist));
    expect(rvol[0]).not.toBe(0);
    expect(rvol[0]).toBe(Math.fround(cliRvol));
  });

  it("decomposes batches into independent rows", async () => {
    const n = 100;
    const poses = new Float32Array(n * 7);
    const twists = new Float32Array(n * 6);
    for (let i = 0; i < n; i++) {
      poses[i * 7 + 0] = 0.5 + 0.025 * i;
      poses[i * 7 + 2] = 0.25;
      poses[i * 7 + 3] = 1;
      twists[i * 6 + 0] = 0.5;
    }
    const batch = await session.penetration(poses, twists);
    for (const i of [0, 17, 55, 99]) {
      const single = await session.penetration(
        poses.subarray(i * 7, i * 7 + 7).slice(),
        twists.subarray(i * 6, i * 6 + 6).slice(),
      );
      expect(single.rvol[0]).toBe(batch.rvol[i]);
      const p = batch.pointsPerFoot;
      expect(Buffer.from(single.offsets.slice().buffer)).toEqual(
        Buffer.from(batch.offsets.slice(i * p * 3, (i + 1) * p * 3).buffer),
      );
    }
  });
});

describe("batch depth", () => {
  let session: Session;
  const camera = { width: 24, height: 12, hfov: 1.5 };
  // straight down: 180-degree rotation about x maps camera +z to world -z
  const downPose = new Float32Array([0.5, 0, 1.0, 0, 1, 0, 0]);

  beforeAll(async () => {
    session = await client.createSession({ meshPath: stairsPath });
  });

  afterAll(async () => {
    await session.destroy();
  });

  it("matches the CLI metric render bitwise", async () => {
    const camJson = join(dir, "cam.json");
    writeFileSync(
      camJson,
      JSON.stringify({ width: 24, height: 12, hfov: 1.5, position: [0.5, 0, 1.0], quaternion: [0, 1, 0, 0] }),
    );
    cli("depth", "--mesh", stairsPath, "--camera", camJson, "--pipeline", "none", "--out", join(dir, "ref"));
    const ref = readFileSync(join(dir, "ref.f32"));

    const { frames, width, height } = await session.depth(downPose, camera, null);
    expect([width, height]).toEqual([24, 12]);
    const got = Buffer.from(frames.slice().buffer);
    expect(got.equals(ref)).toBe(true);
  });

  it("matches the CLI simulation pipeline bitwise for a shared seed", async () => {
    const camJson = join(dir, "cam.json");
    const cfgPath = join(dir, "sim.json");
    const sim = { noise_std: 0.02, artifact_count: 2, blur_kernel: 3, blur_sigma: 0.8 };
    writeFileSync(cfgPath, JSON.stringify({ sim }));
    cli("depth", "--mesh", stairsPath, "--camera", camJson, "--pipeline", "sim",
        "--config", cfgPath, "--seed", "9", "--out", join(dir, "sim_ref"));
    const ref = readFileSync(join(dir, "sim_ref.f32"));

    const { frames } = await session.depth(downPose, camera, sim, [9]);
    expect(Buffer.from(frames.slice().buffer).equals(ref)).toBe(true);
  });

  it("is deterministic for fixed seeds and varies across seeds", async () => {
    const poses = new Float32Array(2 * 7);
    poses.set(downPose, 0);
    poses.set(downPose, 7);
    const sim = { noise_std: 0.05 };
    const same = await session.depth(poses, camera, sim, [4, 4]);
    const firstFrame = same.frames.slice(0, 24 * 12);
    const secondFrame = same.frames.slice(24 * 12);
    expect(Buffer.from(firstFrame.buffer).equals(Buffer.from(secondFrame.buffer))).toBe(true);
    const mixed = await session.depth(poses, camera, sim, [4, 5]);
    expect(
      Buffer.from(mixed.frames.slice(0, 24 * 12).buffer).equals(
        Buffer.from(mixed.frames.slice(24 * 12).buffer),
      ),
    ).toBe(false);
  });

  it("returns an empty array for an empty batch", async () => {
    const { frames, count } = await session.depth(new Float32Array(0), camera, null);
    expect(count).toBe(0);
    expect(frames.length).toBe(0);
  });
});

describe("batch commands", () => {
  const config = { k_v: 1.0, k_omega: 1.5, v_max: 1.2, omega_max: 1.0, turning_fraction: 0.25 };
  const patchConfig = { radius: 0.1, max_height_diff: 0.05, n_targets: 8, seed: 3 };

  it("matches the CLI command assignment bitwise for a shared seed", async () => {
    const session = await client.createSession({ meshPath: stairsPath }, { patchConfig });
    const patchesPath = join(dir, "patches.json");
    cli("patches", "--mesh", stairsPath, "--radius", "0.1", "--delta", "0.05",
        "--count", "8", "--seed", "3", "--out", patchesPath);
    const posesPath = join(dir, "poses.csv");
    const ys = [-0.75, -0.25, 0.25, 0.75];
    writeFileSync(posesPath, ys.map((y) => `0.25,${y},0,1,0,0,0`).join("\n") + "\n");
    const out = join(dir, "cmds.csv");
    cli("commands", "--patches", patchesPath, "--poses", posesPath, "--seed", "5",
        "--kv", "1.0", "--komega", "1.5", "--vmax", "1.2", "--omegamax", "1.0",
        "--turning-fraction", "0.25", "--out", out);
    const rows = parseCsv(readFileSync(out, "utf-8"));

    const poses = new Float32Array(ys.length * 7);
    ys.forEach((y, i) => {
      poses[i * 7 + 0] = 0.25;
      poses[i * 7 + 1] = y;
      poses[i * 7 + 3] = 1;
    });
    const { commands, targetIndex } = await session.commands(poses, config, 5);
    rows.forEach((row, i) => {
      expect(commands[i * 3 + 0]).toBe(Math.fround(Number(row[1])));
      expect(commands[i * 3 + 2]).toBe(Math.fround(Number(row[2])));
      expect(targetIndex[i]).toBe(Number(row[3]));
    });
    await session.destroy();
  });

  it("assigns pure turning commands when the fraction is 1", async () => {
    const session = await client.createSession({ meshPath: stairsPath }, { patchConfig });
    const poses = new Float32Array([0.25, 0, 0, 1, 0, 0, 0]);
    const { commands, targetIndex } = await session.commands(poses, { ...config, turning_fraction: 1.0 }, 1);
    expect(commands[0]).toBe(0);
    expect(targetIndex[0]).toBe(-1);
    await session.destroy();
  });

  it("rejects sessions without patches", async () => {
    const session = await client.createSession({ meshPath: stairsPath });
    await expect(session.commands(new Float32Array(7).fill(0), config, 1)).rejects.toThrow(/non-empty patch/);
    await session.destroy();
  });

  it("draws turning agents at the configured rate", async () => {
    const session = await client.createSession({ meshPath: stairsPath }, { patchConfig });
    const n = 1000;
    const poses = new Float32Array(n * 7);
    for (let i = 0; i < n; i++) poses[i * 7 + 3] = 1;
    const { targetIndex } = await session.commands(poses, { ...config, turning_fraction: 0.1 }, 7);
    let turners = 0;
    for (const idx of targetIndex) if (idx === -1) turners++;
    const sigma = Math.sqrt(n * 0.1 * 0.9);
    expect(Math.abs(turners - n * 0.1)).toBeLessThanOrEqual(3 * sigma);
    await session.destroy();
  });
});

describe("lifecycle", () => {
  it("leaks no handles across 1000 create/destroy cycles", async () => {
    const before = await client.stats();
    for (let i = 0; i < 1000; i++) {
      const session = await client.createSession({ meshPath: flatPath });
      await session.destroy();
    }
    const after = await client.stats();
    expect(after.openSessions).toBe(before.openSessions);
    expect(after.createdTotal).toBe(before.createdTotal + 1000);
  }, 180_000);
});
