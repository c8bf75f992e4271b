/** Minimal mono WAV reader: PCM16 or IEEE float32. */

import { readFileSync } from "node:fs";

export interface WavData {
  sampleRate: number;
  samples: Float64Array;
}

export function readWav(path: string): WavData {
  const blob = readFileSync(path);
  if (blob.length < 12 || blob.toString("ascii", 0, 4) !== "RIFF" || blob.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }
  let format = -1;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;

  let offset = 12;
  while (offset + 8 <= blob.length) {
    const chunkId = blob.toString("ascii", offset, offset + 4);
    const chunkSize = blob.readUInt32LE(offset + 4);
    const body = blob.subarray(offset + 8, offset + 8 + chunkSize);
    if (chunkId === "fmt ") {
      format = body.readUInt16LE(0);
      channels = body.readUInt16LE(2);
      sampleRate = body.readUInt32LE(4);
      bitsPerSample = body.readUInt16LE(14);
    } else if (chunkId === "data") {
      data = Buffer.from(body);
    }
    // chunks are word-aligned
    offset += 8 + chunkSize + (chunkSize % 2);
  }
  if (data === null || format === -1) {
    throw new Error(`${path}: missing fmt or data chunk`);
  }
  if (channels !== 1) {
    throw new Error(`${path}: expected mono audio, got ${channels} channels`);
  }

  if (format === 1 && bitsPerSample === 16) {
    const n = Math.floor(data.length / 2);
    const samples = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      samples[i] = data.readInt16LE(2 * i) / 32768;
    }
    return { sampleRate, samples };
  }
  if (format === 3 && bitsPerSample === 32) {
    const n = Math.floor(data.length / 4);
    const samples = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      samples[i] = data.readFloatLE(4 * i);
    }
    return { sampleRate, samples };
  }
  throw new Error(`${path}: unsupported format ${format}/${bitsPerSample}-bit`);
}
