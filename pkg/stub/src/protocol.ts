/**
 * Binary frame codec for the predictor stdio protocol.
 *
 * All integers are u32 little-endian, all floats f32 little-endian.
 *
 *   handshake  client -> "EPRD" u32 version   server -> "EPOK" u32 version
 *   request    "ERQ1" f32 noise_level u32 n_samples n_samples*f32 y_t
 *              u32 frames u32 bands u32 log_flag frames*bands*f32 mel
 *   response   "ERS1" u32 n_samples n_samples*f32 eps_hat
 */

import type { Readable } from "node:stream";

export const HANDSHAKE_MAGIC = "EPRD";
export const HANDSHAKE_REPLY = "EPOK";
export const REQUEST_MAGIC = "ERQ1";
export const RESPONSE_MAGIC = "ERS1";
export const PROTOCOL_VERSION = 1;

export interface PredictRequest {
  noiseLevel: number;
  yT: Float32Array;
  frames: number;
  bands: number;
  logMel: boolean;
  mel: Float32Array;
}

/** Incremental exact-length reader over a byte stream. */
export class ByteReader {
  private chunks: Buffer[] = [];
  private length = 0;
  private ended = false;
  private waiter: (() => void) | null = null;

  constructor(stream: Readable) {
    stream.on("data", (chunk: Buffer) => {
      this.chunks.push(chunk);
      this.length += chunk.length;
      this.waiter?.();
    });
    stream.on("end", () => {
      this.ended = true;
      this.waiter?.();
    });
    stream.on("error", () => {
      this.ended = true;
      this.waiter?.();
    });
  }

  /** True when the stream ended with no buffered bytes left. */
  atEof(): boolean {
    return this.ended && this.length === 0;
  }

  /** Read exactly n bytes; rejects if the stream ends first. */
  async read(n: number): Promise<Buffer> {
    while (this.length < n) {
      if (this.ended) {
        throw new Error(`stream ended ${this.length}/${n} bytes into a frame`);
      }
      await new Promise<void>((resolve) => {
        this.waiter = resolve;
      });
      this.waiter = null;
    }
    const out = Buffer.concat(this.chunks).subarray(0, n);
    const rest = Buffer.concat(this.chunks).subarray(n);
    this.chunks = rest.length ? [rest] : [];
    this.length = rest.length;
    return Buffer.from(out);
  }
}

export function encodeHandshakeReply(version: number = PROTOCOL_VERSION): Buffer {
  const out = Buffer.alloc(8);
  out.write(HANDSHAKE_REPLY, 0, "ascii");
  out.writeUInt32LE(version, 4);
  return out;
}

/** Parse one request frame, magic included. */
export async function readRequest(reader: ByteReader): Promise<PredictRequest> {
  const magic = (await reader.read(4)).toString("ascii");
  if (magic !== REQUEST_MAGIC) {
    throw new Error(`expected ${REQUEST_MAGIC}, got ${JSON.stringify(magic)}`);
  }
  const head = await reader.read(8);
  const noiseLevel = head.readFloatLE(0);
  const nSamples = head.readUInt32LE(4);
  const yBytes = await reader.read(4 * nSamples);
  const tail = await reader.read(12);
  const frames = tail.readUInt32LE(0);
  const bands = tail.readUInt32LE(4);
  const logFlag = tail.readUInt32LE(8);
  if (logFlag !== 0 && logFlag !== 1) {
    throw new Error(`log-mel flag must be 0 or 1, got ${logFlag}`);
  }
  const melBytes = await reader.read(4 * frames * bands);
  return {
    noiseLevel,
    yT: bufferToF32(yBytes, nSamples),
    frames,
    bands,
    logMel: logFlag === 1,
    mel: bufferToF32(melBytes, frames * bands),
  };
}

export function encodeResponse(epsHat: Float32Array): Buffer {
  const out = Buffer.alloc(8 + 4 * epsHat.length);
  out.write(RESPONSE_MAGIC, 0, "ascii");
  out.writeUInt32LE(epsHat.length, 4);
  for (let i = 0; i < epsHat.length; i++) {
    out.writeFloatLE(epsHat[i]!, 8 + 4 * i);
  }
  return out;
}

function bufferToF32(buffer: Buffer, count: number): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = buffer.readFloatLE(4 * i);
  }
  return out;
}
