/**
 * Run-configuration parsing, limited to what the stub needs: the
 * `schedule.betas = [..]` entry of the flat dotted-key format.
 */

import { readFileSync } from "node:fs";

export function readScheduleBetas(path: string): number[] {
  const text = readFileSync(path, "utf8");
  for (const rawLine of text.split(/\r?\n/)) {
    const line = rawLine.split("#", 1)[0]!.trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) continue;
    const key = line.slice(0, eq).trim();
    if (key !== "schedule.betas") continue;
    const value = line.slice(eq + 1).trim();
    if (!value.startsWith("[") || !value.endsWith("]")) {
      throw new Error(`schedule.betas must be an array, got ${value}`);
    }
    const betas = value
      .slice(1, -1)
      .split(",")
      .map((token) => Number(token.trim()));
    if (betas.length === 0 || betas.some((b) => !Number.isFinite(b) || b <= 0 || b >= 1)) {
      throw new Error(`every beta must be a number in (0, 1): ${value}`);
    }
    return betas;
  }
  throw new Error(`${path}: no schedule.betas entry found`);
}

/** Cumulative products of (1 - beta), indexed by step t - 1. */
export function alphaBars(betas: number[]): number[] {
  const bars: number[] = [];
  let bar = 1.0;
  for (const beta of betas) {
    bar *= 1.0 - beta;
    bars.push(bar);
  }
  return bars;
}

/** Index of the step whose sqrt(alpha_bar) is closest to the noise level. */
export function nearestStep(noiseLevel: number, bars: number[]): number {
  let best = 0;
  let bestDist = Infinity;
  for (let i = 0; i < bars.length; i++) {
    const dist = Math.abs(Math.sqrt(bars[i]!) - noiseLevel);
    if (dist < bestDist) {
      bestDist = dist;
      best = i;
    }
  }
  return best;
}
