#!/usr/bin/env node
/** Writes a seeded toy model JSON file for smoke tests and demos. */

import { realpathSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { buildToyModel } from "./toymodel.js";

const USAGE = `usage: mlse-toy-model --out FILE [--seed N] [--hidden N]
                      [--layers N] [--heads N] [--max-position N]`;

export function main(argv: string[], err = (m: string) => process.stderr.write(m + "\n")): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        out: { type: "string" },
        seed: { type: "string", default: "0" },
        hidden: { type: "string", default: "16" },
        layers: { type: "string", default: "3" },
        heads: { type: "string", default: "2" },
        "max-position": { type: "string", default: "64" },
      },
      strict: true,
      allowPositionals: false,
    });
  } catch (e) {
    err((e as Error).message);
    err(USAGE);
    return 2;
  }
  const opts = parsed.values;
  if (!opts.out) {
    err("--out is required");
    err(USAGE);
    return 2;
  }
  const ints: Record<string, number> = {};
  for (const flag of ["seed", "hidden", "layers", "heads", "max-position"] as const) {
    const value = Number(opts[flag]);
    if (!Number.isInteger(value) || value < 0) {
      err(`--${flag} must be a non-negative integer, got ${opts[flag]}`);
      err(USAGE);
      return 2;
    }
    ints[flag] = value;
  }
  try {
    const model = buildToyModel({
      seed: ints.seed,
      hiddenSize: ints.hidden,
      nLayers: ints.layers,
      nHeads: ints.heads,
      maxPosition: ints["max-position"],
    });
    writeFileSync(opts.out, JSON.stringify(model));
    err(`wrote ${opts.out}: hidden ${model.hiddenSize}, ` +
        `${model.nLayers} layers, vocab ${Object.keys(model.vocab).length}`);
    return 0;
  } catch (e) {
    err((e as Error).message);
    return 1;
  }
}

const invokedPath = process.argv[1];
if (invokedPath && import.meta.url === pathToFileURL(realpathSync(invokedPath)).href) {
  process.exit(main(process.argv.slice(2)));
}
