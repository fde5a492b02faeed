/** One-shot catalog extraction into an MLSE bank. */

import { readFileSync } from "node:fs";

import { encodeTokens } from "./encoder.js";
import { writeBank } from "./mlse.js";
import { loadModel } from "./model.js";
import { encodeText } from "./tokenizer.js";

export const DEFAULT_LAYERS = 3;
export const DEFAULT_MAX_TOKENS = 128;
export const DEFAULT_BATCH_SIZE = 32;

export interface ExtractionJob {
  catalogPath: string;
  modelPath: string;
  outPath: string;
  /** How many of the deepest layers to keep. */
  layers?: number;
  /** Hard cap on tokens per item, classifier token included. */
  maxTokens?: number;
  /** Items encoded per progress unit; has no effect on the output bytes. */
  batchSize?: number;
  onProgress?: (done: number, total: number) => void;
}

export interface ExtractionSummary {
  nItems: number;
  nLayers: number;
  dim: number;
  outPath: string;
}

export interface CatalogRow {
  itemId: string;
  text: string;
}

/** One item per line: `item_id<TAB>description text`. Blank lines skipped. */
export function readCatalog(path: string): CatalogRow[] {
  let raw: string;
  try {
    raw = readFileSync(path, "utf8");
  } catch (e) {
    throw new Error(`cannot read catalog ${path}: ${(e as Error).message}`);
  }
  const rows: CatalogRow[] = [];
  const lines = raw.split("\n");
  for (let lineno = 1; lineno <= lines.length; lineno++) {
    const line = lines[lineno - 1];
    if (line.length === 0) continue;
    const tab = line.indexOf("\t");
    if (tab < 0) {
      throw new Error(`${path}:${lineno}: expected item_id<TAB>text`);
    }
    rows.push({ itemId: line.slice(0, tab), text: line.slice(tab + 1) });
  }
  return rows;
}

/**
 * Encode every catalog row and write the classifier-position states of the
 * last `layers` encoder layers, shallowest kept layer first, in catalog
 * order.
 */
export function extract(job: ExtractionJob): ExtractionSummary {
  const layers = job.layers ?? DEFAULT_LAYERS;
  const maxTokens = job.maxTokens ?? DEFAULT_MAX_TOKENS;
  const batchSize = job.batchSize ?? DEFAULT_BATCH_SIZE;
  if (!Number.isInteger(layers) || layers < 1) {
    throw new Error(`layers must be a positive integer, got ${layers}`);
  }
  if (!Number.isInteger(maxTokens) || maxTokens < 1) {
    throw new Error(`maxTokens must be a positive integer, got ${maxTokens}`);
  }
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new Error(`batchSize must be a positive integer, got ${batchSize}`);
  }

  const rows = readCatalog(job.catalogPath);
  const model = loadModel(job.modelPath);
  if (layers > model.nLayers) {
    throw new Error(`asked to keep ${layers} layers but the model has ${model.nLayers}`);
  }
  const tokenCap = Math.min(maxTokens, model.maxPosition);
  const dim = model.hiddenSize;
  const values = new Float32Array(rows.length * layers * dim);

  for (let start = 0; start < rows.length; start += batchSize) {
    const end = Math.min(start + batchSize, rows.length);
    for (let item = start; item < end; item++) {
      const ids = encodeText(rows[item].text, model.vocab, tokenCap);
      const states = encodeTokens(model, ids);
      for (let kept = 0; kept < layers; kept++) {
        const state = states[model.nLayers - layers + kept];
        const offset = (item * layers + kept) * dim;
        for (let d = 0; d < dim; d++) {
          values[offset + d] = Math.fround(state[d]);
        }
      }
    }
    job.onProgress?.(end, rows.length);
  }

  writeBank(job.outPath, values, rows.length, layers, dim);
  return { nItems: rows.length, nLayers: layers, dim, outPath: job.outPath };
}
