#!/usr/bin/env node
/** Command line front end: flags mirror the extraction job fields. */

import { realpathSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { DEFAULT_BATCH_SIZE, DEFAULT_LAYERS, DEFAULT_MAX_TOKENS, extract } from "./extract.js";

const USAGE = `usage: mlse-extract --catalog FILE --model FILE --out FILE
                    [--layers N] [--max-tokens N] [--batch-size N] [--quiet]

Encodes an item catalog (item_id<TAB>text per line) with the transformer
encoder stored in the JSON model file and writes the classifier-token
states of the last N layers to an MLSE bank.

defaults: --layers ${DEFAULT_LAYERS}, --max-tokens ${DEFAULT_MAX_TOKENS}, --batch-size ${DEFAULT_BATCH_SIZE}`;

type ErrWriter = (msg: string) => void;

function positiveInt(flag: string, raw: string | undefined, fallback: number): number {
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 1) {
    throw new UsageError(`${flag} must be a positive integer, got ${raw}`);
  }
  return value;
}

class UsageError extends Error {}

export function main(argv: string[], err: ErrWriter = (m) => process.stderr.write(m + "\n")): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        catalog: { type: "string" },
        model: { type: "string" },
        out: { type: "string" },
        layers: { type: "string" },
        "max-tokens": { type: "string" },
        "batch-size": { type: "string" },
        quiet: { type: "boolean", default: false },
        help: { type: "boolean", default: false },
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
  if (opts.help) {
    err(USAGE);
    return 0;
  }

  try {
    for (const flag of ["catalog", "model", "out"] as const) {
      if (!opts[flag]) {
        throw new UsageError(`--${flag} is required`);
      }
    }
    const job = {
      catalogPath: opts.catalog as string,
      modelPath: opts.model as string,
      outPath: opts.out as string,
      layers: positiveInt("--layers", opts.layers, DEFAULT_LAYERS),
      maxTokens: positiveInt("--max-tokens", opts["max-tokens"], DEFAULT_MAX_TOKENS),
      batchSize: positiveInt("--batch-size", opts["batch-size"], DEFAULT_BATCH_SIZE),
      onProgress: opts.quiet
        ? undefined
        : (done: number, total: number) => err(`encoded ${done}/${total} items`),
    };
    const summary = extract(job);
    if (!opts.quiet) {
      err(`wrote ${summary.outPath}: ${summary.nItems} items, ` +
          `${summary.nLayers} layers, dim ${summary.dim}`);
    }
    return 0;
  } catch (e) {
    if (e instanceof UsageError) {
      err((e as Error).message);
      err(USAGE);
      return 2;
    }
    err((e as Error).message);
    return 1;
  }
}

const invokedPath = process.argv[1];
if (invokedPath && import.meta.url === pathToFileURL(realpathSync(invokedPath)).href) {
  process.exit(main(process.argv.slice(2)));
}
