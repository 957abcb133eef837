/**
 * Client for the terrainkit session server.
 *
 * Spawns `terrainkit serve` as a subprocess and exposes the four batched
 * operations (penetration, depth, commands, plus session management) with
 * typed-array interfaces. Array arguments must be Float32Array with exact
 * row layouts; wrong dtypes are rejected, never converted, so the hot
 * path stays allocation-free on the sending side. Responses are viewed
 * zero-copy where alignment allows.
 *
 * Pose rows are `(x, y, z, qw, qx, qy, qz)` (scalar-first unit
 * quaternions); twist rows are `(vx, vy, vz, wx, wy, wz)`.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import type { Readable, Writable } from "node:stream";

import type {
  CameraSpec,
  CommandConfig,
  EdgeDetectConfig,
  PatchConfig,
  SimPipelineConfig,
} from "./config.js";
import {
  FrameDecoder,
  Opcode,
  STATUS_OK,
  asFloat32,
  asInt32,
  encodeFrame,
  type Frame,
} from "./protocol.js";

export class ServerError extends Error {}

export interface ClientOptions {
  /** Command used to start the server (default: python3 -m terrainkit.cli serve). */
  command?: string[];
}

export interface SessionInfo {
  id: number;
  numFaces: number;
  numEdges: number;
  numPatches: number;
  /** flat [x, y, z] triples of the session's navigation patches */
  patches: Float32Array;
}

export interface PenetrationResult {
  /** per-row penalty, length N */
  rvol: Float32Array;
  /** flat N x pointsPerFoot x 3 penetration offsets */
  offsets: Float32Array;
  pointsPerFoot: number;
}

export interface DepthResult {
  /** flat N x height x width frames */
  frames: Float32Array;
  width: number;
  height: number;
  count: number;
}

export interface CommandsResult {
  /** flat N x 3 rows of (v_x, v_y, omega_z) */
  commands: Float32Array;
  /** patch index per agent, -1 for turning agents */
  targetIndex: Int32Array;
}

function requireF32(name: string, value: unknown, length: number): Float32Array {
  if (!(value instanceof Float32Array)) {
    throw new TypeError(`${name} must be a Float32Array, got ${value?.constructor?.name ?? typeof value}`);
  }
  if (value.length !== length) {
    throw new RangeError(`${name} must have length ${length}, got ${value.length}`);
  }
  return value;
}

export class TerrainClient {
  private proc: ChildProcessByStdio<Writable, Readable, Readable>;
  private decoder = new FrameDecoder();
  private pending: Array<{ resolve: (f: Frame) => void; reject: (e: Error) => void }> = [];
  private stderrTail = "";
  private closed = false;

  private constructor(proc: ChildProcessByStdio<Writable, Readable, Readable>) {
    this.proc = proc;
    proc.stdout.on("data", (chunk: Buffer) => {
      let frames: Frame[];
      try {
        frames = this.decoder.push(chunk);
      } catch (err) {
        this.failAll(err as Error);
        return;
      }
      for (const frame of frames) {
        const waiter = this.pending.shift();
        if (waiter) waiter.resolve(frame);
      }
    });
    proc.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail = (this.stderrTail + chunk.toString("utf-8")).slice(-4000);
    });
    proc.on("exit", () => {
      this.closed = true;
      this.failAll(new ServerError(`server exited\n${this.stderrTail}`));
    });
  }

  /** Start the server subprocess and verify the protocol revision. */
  static async start(options: ClientOptions = {}): Promise<TerrainClient> {
    const command = options.command ?? ["python3", "-m", "terrainkit.cli", "serve"];
    const proc = spawn(command[0], command.slice(1), { stdio: ["pipe", "pipe", "pipe"] });
    return new TerrainClient(proc);
  }

  private failAll(err: Error) {
    const waiters = this.pending;
    this.pending = [];
    for (const w of waiters) w.reject(err);
  }

  private request(code: Opcode, meta: unknown, payload?: Uint8Array): Promise<Frame> {
    if (this.closed) {
      return Promise.reject(new ServerError("client is closed"));
    }
    return new Promise<Frame>((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.proc.stdin.write(encodeFrame(code, meta, payload));
    }).then((frame) => {
      if (frame.code !== STATUS_OK) {
        throw new ServerError(String(frame.meta["error"] ?? "server error"));
      }
      return frame;
    });
  }

  /** Versioned ABI string and server version. */
  async abiVersion(): Promise<{ abi: string; version: string }> {
    const frame = await this.request(Opcode.Hello, {});
    return { abi: String(frame.meta["abi"]), version: String(frame.meta["version"]) };
  }

  /**
   * Build a terrain session from a mesh file or raw vertex/face arrays.
   * The server detects edges, builds the BVH and capsule grid, and samples
   * flat patches when a patch config is given.
   */
  async createSession(
    source: { meshPath: string } | { vertices: Float32Array; faces: Uint32Array },
    options: { edgeConfig?: EdgeDetectConfig; patchConfig?: PatchConfig } = {},
  ): Promise<Session> {
    const meta: Record<string, unknown> = {};
    if (options.edgeConfig) meta["edge_config"] = options.edgeConfig;
    if (options.patchConfig) meta["patch_config"] = options.patchConfig;
    let payload: Uint8Array | undefined;
    if ("meshPath" in source) {
      meta["mesh_path"] = source.meshPath;
    } else {
      if (!(source.vertices instanceof Float32Array)) throw new TypeError("vertices must be a Float32Array");
      if (!(source.faces instanceof Uint32Array)) throw new TypeError("faces must be a Uint32Array");
      meta["num_vertices"] = source.vertices.length / 3;
      meta["num_faces"] = source.faces.length / 3;
      const buf = Buffer.alloc(source.vertices.byteLength + source.faces.byteLength);
      Buffer.from(source.vertices.buffer, source.vertices.byteOffset, source.vertices.byteLength).copy(buf, 0);
      Buffer.from(source.faces.buffer, source.faces.byteOffset, source.faces.byteLength).copy(buf, source.vertices.byteLength);
      payload = buf;
    }
    const frame = await this.request(Opcode.CreateSession, meta, payload);
    const info: SessionInfo = {
      id: Number(frame.meta["session"]),
      numFaces: Number(frame.meta["num_faces"]),
      numEdges: Number(frame.meta["num_edges"]),
      numPatches: Number(frame.meta["num_patches"]),
      patches: asFloat32(frame.payload, 0, Number(frame.meta["num_patches"]) * 3),
    };
    return new Session(this, info);
  }

  async stats(): Promise<{ openSessions: number; createdTotal: number }> {
    const frame = await this.request(Opcode.Stats, {});
    return {
      openSessions: Number(frame.meta["open_sessions"]),
      createdTotal: Number(frame.meta["created_total"]),
    };
  }

  /** Ask the server to exit cleanly and wait for it. */
  async shutdown(): Promise<void> {
    if (this.closed) return;
    const done = new Promise<void>((resolve) => this.proc.once("exit", () => resolve()));
    try {
      await this.request(Opcode.Shutdown, {});
    } catch {
      // the exit race is fine; the process is going down either way
    }
    this.proc.stdin.end();
    await done;
  }

  /** Internal: issue a session-scoped request. */
  sessionRequest(code: Opcode, meta: Record<string, unknown>, payload?: Uint8Array): Promise<Frame> {
    return this.request(code, meta, payload);
  }
}

export class Session {
  readonly info: SessionInfo;
  private client: TerrainClient;
  private destroyed = false;

  constructor(client: TerrainClient, info: SessionInfo) {
    this.client = client;
    this.info = info;
  }

  private guard() {
    if (this.destroyed) throw new ServerError(`session ${this.info.id} is destroyed`);
  }

  /**
   * Batched foot penetration: poses N x 7, twists N x 6, both Float32Array.
   * Returns the volumetric penalty per row and per-probe exit offsets.
   */
  async penetration(
    poses: Float32Array,
    twists: Float32Array,
    options: { footBox?: [number, number, number]; footShape?: [number, number, number] } = {},
  ): Promise<PenetrationResult> {
    this.guard();
    const n = poses.length / 7;
    requireF32("poses", poses, n * 7);
    requireF32("twists", twists, n * 6);
    const buf = Buffer.alloc(poses.byteLength + twists.byteLength);
    Buffer.from(poses.buffer, poses.byteOffset, poses.byteLength).copy(buf, 0);
    Buffer.from(twists.buffer, twists.byteOffset, twists.byteLength).copy(buf, poses.byteLength);
    const meta: Record<string, unknown> = { session: this.info.id, count: n };
    if (options.footBox) meta["foot_box"] = options.footBox;
    if (options.footShape) meta["foot_shape"] = options.footShape;
    const frame = await this.client.sessionRequest(Opcode.Penetration, meta, buf);
    const pointsPerFoot = Number(frame.meta["points_per_foot"]);
    return {
      rvol: asFloat32(frame.payload, 0, n),
      offsets: asFloat32(frame.payload, n * 4, n * pointsPerFoot * 3),
      pointsPerFoot,
    };
  }

  /**
   * Batched depth rendering from camera poses (N x 7). With a pipeline
   * config the frames come back normalized to [0, 1]; seeds, when given,
   * must have one entry per pose. Metric frames (sim = null) mark missed
   * pixels as -1, matching the depth file convention.
   */
  async depth(
    poses: Float32Array,
    camera: CameraSpec,
    sim: SimPipelineConfig | null = null,
    seeds?: number[],
  ): Promise<DepthResult> {
    this.guard();
    const n = poses.length / 7;
    requireF32("poses", poses, n * 7);
    if (seeds && seeds.length !== n) {
      throw new RangeError(`seeds must have length ${n}, got ${seeds.length}`);
    }
    const meta: Record<string, unknown> = { session: this.info.id, count: n, camera, sim };
    if (seeds) meta["seeds"] = seeds;
    const frame = await this.client.sessionRequest(
      Opcode.Depth,
      meta,
      Buffer.from(poses.buffer, poses.byteOffset, poses.byteLength),
    );
    const width = Number(frame.meta["width"]);
    const height = Number(frame.meta["height"]);
    return { frames: asFloat32(frame.payload, 0, n * width * height), width, height, count: n };
  }

  /**
   * Batched navigation commands against the session's flat patches
   * (poses N x 7). Deterministic for a fixed seed.
   */
  async commands(poses: Float32Array, config: CommandConfig = {}, seed?: number): Promise<CommandsResult> {
    this.guard();
    const n = poses.length / 7;
    requireF32("poses", poses, n * 7);
    const meta: Record<string, unknown> = { session: this.info.id, count: n, config };
    if (seed !== undefined) meta["seed"] = seed;
    const frame = await this.client.sessionRequest(
      Opcode.Commands,
      meta,
      Buffer.from(poses.buffer, poses.byteOffset, poses.byteLength),
    );
    return {
      commands: asFloat32(frame.payload, 0, n * 3),
      targetIndex: asInt32(frame.payload, n * 12, n),
    };
  }

  async destroy(): Promise<void> {
    if (this.destroyed) return;
    await this.client.sessionRequest(Opcode.DestroySession, { session: this.info.id });
    this.destroyed = true;
  }
}
