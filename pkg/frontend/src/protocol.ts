/**
 * Framing for the TPS1 session protocol.
 *
 * Every frame, in both directions, is:
 *
 *     magic  "TPS1"
 *     u32    opcode (request) / status (response; 0 ok, 1 error)
 *     u32    JSON metadata length
 *     u32    binary payload length
 *     ...    UTF-8 JSON, then the raw payload
 *
 * All integers and array payloads are little-endian.
 */

export const MAGIC = Buffer.from("TPS1", "ascii");
export const HEADER_BYTES = 16;

export enum Opcode {
  Hello = 1,
  CreateSession = 2,
  DestroySession = 3,
  Penetration = 4,
  Depth = 5,
  Commands = 6,
  Stats = 7,
  Shutdown = 8,
}

export const STATUS_OK = 0;
export const STATUS_ERROR = 1;

export interface Frame {
  code: number;
  meta: Record<string, unknown>;
  payload: Buffer;
}

export function encodeFrame(code: number, meta: unknown, payload?: Uint8Array): Buffer {
  const body = Buffer.from(JSON.stringify(meta ?? {}), "utf-8");
  const header = Buffer.alloc(HEADER_BYTES);
  MAGIC.copy(header, 0);
  header.writeUInt32LE(code, 4);
  header.writeUInt32LE(body.length, 8);
  header.writeUInt32LE(payload?.byteLength ?? 0, 12);
  const parts: Uint8Array[] = [header, body];
  if (payload && payload.byteLength > 0) {
    parts.push(payload);
  }
  return Buffer.concat(parts);
}

/** Incremental decoder: feed stream chunks, pull complete frames. */
export class FrameDecoder {
  private buffered: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): Frame[] {
    this.buffered = this.buffered.length === 0 ? chunk : Buffer.concat([this.buffered, chunk]);
    const frames: Frame[] = [];
    for (;;) {
      if (this.buffered.length < HEADER_BYTES) break;
      if (!this.buffered.subarray(0, 4).equals(MAGIC)) {
        throw new Error("malformed TPS1 frame header");
      }
      const code = this.buffered.readUInt32LE(4);
      const jsonLen = this.buffered.readUInt32LE(8);
      const binLen = this.buffered.readUInt32LE(12);
      const total = HEADER_BYTES + jsonLen + binLen;
      if (this.buffered.length < total) break;
      const meta = jsonLen
        ? (JSON.parse(this.buffered.subarray(HEADER_BYTES, HEADER_BYTES + jsonLen).toString("utf-8")) as Record<string, unknown>)
        : {};
      // copy the payload out so it stays valid after the next push()
      const payload = Buffer.from(this.buffered.subarray(HEADER_BYTES + jsonLen, total));
      frames.push({ code, meta, payload });
      this.buffered = this.buffered.subarray(total);
    }
    return frames;
  }
}

/**
 * View a buffer region as Float32Array without copying when the underlying
 * offset is 4-byte aligned; copies otherwise.
 */
export function asFloat32(buf: Buffer, byteOffset: number, count: number): Float32Array {
  const start = buf.byteOffset + byteOffset;
  if (start % 4 === 0) {
    return new Float32Array(buf.buffer, start, count);
  }
  const copy = Buffer.alloc(count * 4);
  buf.copy(copy, 0, byteOffset, byteOffset + count * 4);
  return new Float32Array(copy.buffer, 0, count);
}

export function asInt32(buf: Buffer, byteOffset: number, count: number): Int32Array {
  const start = buf.byteOffset + byteOffset;
  if (start % 4 === 0) {
    return new Int32Array(buf.buffer, start, count);
  }
  const copy = Buffer.alloc(count * 4);
  buf.copy(copy, 0, byteOffset, byteOffset + count * 4);
  return new Int32Array(copy.buffer, 0, count);
}
