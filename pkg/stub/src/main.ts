#!/usr/bin/env node
/**
 * Entry point: `node dist/main.js <zero|oracle> [options]`
 *
 *   --ref-wav <path>      reference waveform (oracle mode)
 *   --schedule <path>     run-config file with schedule.betas (oracle mode)
 *   --fail-after <k>      serve k requests, then die without replying
 *
 * Loading a real neural checkpoint instead of the oracle formula is the
 * intended extension point; swap the predict() call in server.ts.
 */

import { parseArgs } from "node:util";

import { serve, type StubConfig } from "./server.js";

async function main(): Promise<number> {
  const { values, positionals } = parseArgs({
    allowPositionals: true,
    options: {
      "ref-wav": { type: "string" },
      schedule: { type: "string" },
      "fail-after": { type: "string" },
    },
  });
  const mode = positionals[0];
  if (mode !== "zero" && mode !== "oracle") {
    process.stderr.write("usage: main.js <zero|oracle> [--ref-wav P] [--schedule P] [--fail-after K]\n");
    return 2;
  }
  const config: StubConfig = {
    mode,
    referenceWav: values["ref-wav"],
    scheduleFile: values.schedule,
  };
  if (values["fail-after"] !== undefined) {
    config.failAfter = Number(values["fail-after"]);
  }
  return serve(process.stdin, process.stdout, config);
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    process.stderr.write(`fatal: ${err?.message ?? err}\n`);
    process.exit(2);
  });
