/**
 * Request loop for the predictor protocol.
 *
 * Single-threaded, one request at a time. A bad handshake writes nothing
 * and exits nonzero; a truncated frame exits nonzero; stream close after a
 * complete exchange is a clean exit.
 */

import type { Readable, Writable } from "node:stream";

import {
  ByteReader,
  HANDSHAKE_MAGIC,
  encodeHandshakeReply,
  encodeResponse,
  readRequest,
} from "./protocol.js";
import { alphaBars, nearestStep, readScheduleBetas } from "./schedule.js";
import { readWav } from "./wav.js";

export interface StubConfig {
  mode: "zero" | "oracle";
  referenceWav?: string;
  scheduleFile?: string;
  /** Serve this many requests, then exit nonzero without replying (tests). */
  failAfter?: number;
}

export async function serve(
  input: Readable,
  output: Writable,
  config: StubConfig,
): Promise<number> {
  let reference: Float64Array | null = null;
  let bars: number[] | null = null;
  if (config.mode === "oracle") {
    if (!config.referenceWav || !config.scheduleFile) {
      throw new Error("oracle mode requires a reference WAV and a schedule file");
    }
    reference = readWav(config.referenceWav).samples;
    bars = alphaBars(readScheduleBetas(config.scheduleFile));
  }

  const reader = new ByteReader(input);

  let hello: Buffer;
  try {
    hello = await reader.read(8);
  } catch {
    return 1;
  }
  if (hello.toString("ascii", 0, 4) !== HANDSHAKE_MAGIC) {
    return 1;
  }
  const version = hello.readUInt32LE(4);
  output.write(encodeHandshakeReply(version));

  let served = 0;
  for (;;) {
    if (reader.atEof()) {
      return 0;
    }
    let request;
    try {
      request = await readRequest(reader);
    } catch (err) {
      if (reader.atEof() && served > 0) {
        return 0; // clean shutdown between frames
      }
      process.stderr.write(`protocol error: ${(err as Error).message}\n`);
      return 1;
    }
    if (config.failAfter !== undefined && served >= config.failAfter) {
      return 7;
    }
    output.write(encodeResponse(predict(request.yT, request.noiseLevel, reference, bars)));
    served += 1;
  }
}

function predict(
  yT: Float32Array,
  noiseLevel: number,
  reference: Float64Array | null,
  bars: number[] | null,
): Float32Array {
  const out = new Float32Array(yT.length);
  if (reference === null || bars === null) {
    return out; // zero mode
  }
  if (reference.length < yT.length) {
    throw new Error(
      `reference has ${reference.length} samples, request asks for ${yT.length}`,
    );
  }
  const abar = bars[nearestStep(noiseLevel, bars)]!;
  const root = Math.sqrt(abar);
  const denom = Math.sqrt(1.0 - abar);
  for (let i = 0; i < yT.length; i++) {
    out[i] = Math.fround((yT[i]! - root * reference[i]!) / denom);
  }
  return out;
}
