/** Encoder weights loaded from a JSON model file. */

import { readFileSync } from "node:fs";

import type { Vocab } from "./tokenizer.js";
import { CLS_TOKEN, UNK_TOKEN } from "./tokenizer.js";

export interface LayerNormParams {
  gamma: number[];
  beta: number[];
}

export interface AttentionParams {
  wq: number[][];
  bq: number[];
  wk: number[][];
  bk: number[];
  wv: number[][];
  bv: number[];
  wo: number[][];
  bo: number[];
}

export interface FeedForwardParams {
  w1: number[][];
  b1: number[];
  w2: number[][];
  b2: number[];
}

export interface EncoderLayer {
  attention: AttentionParams;
  attentionNorm: LayerNormParams;
  ffn: FeedForwardParams;
  ffnNorm: LayerNormParams;
}

export interface EncoderModel {
  hiddenSize: number;
  nLayers: number;
  nHeads: number;
  intermediateSize: number;
  maxPosition: number;
  vocab: Vocab;
  tokenEmbeddings: number[][];
  positionEmbeddings: number[][];
  embeddingNorm: LayerNormParams;
  layers: EncoderLayer[];
}

function checkMatrix(name: string, m: number[][], rows: number, cols: number): void {
  if (!Array.isArray(m) || m.length !== rows) {
    throw new Error(`model field ${name}: expected ${rows} rows, got ${m?.length ?? "none"}`);
  }
  for (const row of m) {
    if (!Array.isArray(row) || row.length !== cols) {
      throw new Error(`model field ${name}: expected ${cols} columns`);
    }
  }
}

function checkVector(name: string, v: number[], len: number): void {
  if (!Array.isArray(v) || v.length !== len) {
    throw new Error(`model field ${name}: expected length ${len}, got ${v?.length ?? "none"}`);
  }
}

function checkNorm(name: string, p: LayerNormParams, len: number): void {
  checkVector(`${name}.gamma`, p.gamma, len);
  checkVector(`${name}.beta`, p.beta, len);
}

/** Validate structural consistency; throws with the offending field named. */
export function validateModel(model: EncoderModel): void {
  const d = model.hiddenSize;
  const inter = model.intermediateSize;
  if (!Number.isInteger(d) || d < 1) {
    throw new Error("model: hiddenSize must be a positive integer");
  }
  if (!Number.isInteger(model.nLayers) || model.nLayers < 1) {
    throw new Error("model: nLayers must be a positive integer");
  }
  if (!Number.isInteger(model.nHeads) || model.nHeads < 1 || d % model.nHeads !== 0) {
    throw new Error("model: nHeads must be a positive integer dividing hiddenSize");
  }
  if (!Number.isInteger(model.maxPosition) || model.maxPosition < 1) {
    throw new Error("model: maxPosition must be a positive integer");
  }
  if (typeof model.vocab !== "object" || model.vocab === null) {
    throw new Error("model: vocab must map tokens to ids");
  }
  for (const tok of [CLS_TOKEN, UNK_TOKEN]) {
    if (!(tok in model.vocab)) {
      throw new Error(`model: vocab is missing the reserved token ${tok}`);
    }
  }
  const vocabSize = model.tokenEmbeddings.length;
  for (const [tok, id] of Object.entries(model.vocab)) {
    if (!Number.isInteger(id) || id < 0 || id >= vocabSize) {
      throw new Error(`model: vocab id for ${tok} is outside the embedding table`);
    }
  }
  checkMatrix("tokenEmbeddings", model.tokenEmbeddings, vocabSize, d);
  checkMatrix("positionEmbeddings", model.positionEmbeddings, model.maxPosition, d);
  checkNorm("embeddingNorm", model.embeddingNorm, d);
  if (!Array.isArray(model.layers) || model.layers.length !== model.nLayers) {
    throw new Error("model: layers must hold nLayers entries");
  }
  model.layers.forEach((layer, idx) => {
    const name = `layers[${idx}]`;
    for (const key of ["wq", "wk", "wv", "wo"] as const) {
      checkMatrix(`${name}.attention.${key}`, layer.attention[key], d, d);
    }
    for (const key of ["bq", "bk", "bv", "bo"] as const) {
      checkVector(`${name}.attention.${key}`, layer.attention[key], d);
    }
    checkNorm(`${name}.attentionNorm`, layer.attentionNorm, d);
    checkMatrix(`${name}.ffn.w1`, layer.ffn.w1, d, inter);
    checkVector(`${name}.ffn.b1`, layer.ffn.b1, inter);
    checkMatrix(`${name}.ffn.w2`, layer.ffn.w2, inter, d);
    checkVector(`${name}.ffn.b2`, layer.ffn.b2, d);
    checkNorm(`${name}.ffnNorm`, layer.ffnNorm, d);
  });
}

export function loadModel(path: string): EncoderModel {
  let raw: string;
  try {
    raw = readFileSync(path, "utf8");
  } catch (e) {
    throw new Error(`cannot read model file ${path}: ${(e as Error).message}`);
  }
  let model: EncoderModel;
  try {
    model = JSON.parse(raw) as EncoderModel;
  } catch (e) {
    throw new Error(`model file ${path} is not valid JSON: ${(e as Error).message}`);
  }
  validateModel(model);
  return model;
}
