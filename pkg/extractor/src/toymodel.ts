/**
 * Seeded toy models for smoke tests and demos. Real runs should point the
 * extractor at weights exported from an actual pretrained encoder; the JSON
 * schema is identical either way.
 */

import type { EncoderLayer, EncoderModel, LayerNormParams } from "./model.js";
import { CLS_TOKEN, UNK_TOKEN } from "./tokenizer.js";

const BASE_WORDS = [
  "unknown", "item", "red", "blue", "green", "steel", "wireless", "water",
  "mouse", "keyboard", "coffee", "mug", "bottle", "desk", "lamp", "usb",
  "cable", "office", "chair", "pen", "notebook", "monitor", "stand", "mat",
];

export interface ToyModelOptions {
  seed?: number;
  hiddenSize?: number;
  nLayers?: number;
  nHeads?: number;
  intermediateSize?: number;
  maxPosition?: number;
  extraWords?: string[];
}

/** Deterministic 32-bit generator, uniform on [0, 1). */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussian(uniform: () => number): () => number {
  return () => {
    // Box-Muller; guard the log against a zero draw.
    const u = uniform() || 1e-12;
    const v = uniform();
    return Math.sqrt(-2.0 * Math.log(u)) * Math.cos(2.0 * Math.PI * v);
  };
}

export function buildToyModel(options: ToyModelOptions = {}): EncoderModel {
  const {
    seed = 0,
    hiddenSize = 16,
    nLayers = 3,
    nHeads = 2,
    intermediateSize = 32,
    maxPosition = 64,
    extraWords = [],
  } = options;

  const draw = gaussian(mulberry32(seed));
  const vec = (len: number, scale: number, shift = 0) =>
    Array.from({ length: len }, () => shift + scale * draw());
  const mat = (rows: number, cols: number, scale: number) =>
    Array.from({ length: rows }, () => vec(cols, scale));
  const norm = (): LayerNormParams => ({
    gamma: vec(hiddenSize, 0.05, 1.0),
    beta: vec(hiddenSize, 0.02),
  });

  const words = [...BASE_WORDS];
  for (const w of extraWords) {
    if (!words.includes(w)) words.push(w);
  }
  const vocab: Record<string, number> = { [CLS_TOKEN]: 0, [UNK_TOKEN]: 1 };
  words.forEach((w, i) => {
    vocab[w] = i + 2;
  });
  const vocabSize = words.length + 2;

  const layers: EncoderLayer[] = Array.from({ length: nLayers }, () => ({
    attention: {
      wq: mat(hiddenSize, hiddenSize, 0.1),
      bq: vec(hiddenSize, 0.02),
      wk: mat(hiddenSize, hiddenSize, 0.1),
      bk: vec(hiddenSize, 0.02),
      wv: mat(hiddenSize, hiddenSize, 0.1),
      bv: vec(hiddenSize, 0.02),
      wo: mat(hiddenSize, hiddenSize, 0.1),
      bo: vec(hiddenSize, 0.02),
    },
    attentionNorm: norm(),
    ffn: {
      w1: mat(hiddenSize, intermediateSize, 0.1),
      b1: vec(intermediateSize, 0.02),
      w2: mat(intermediateSize, hiddenSize, 0.1),
      b2: vec(hiddenSize, 0.02),
    },
    ffnNorm: norm(),
  }));

  return {
    hiddenSize,
    nLayers,
    nHeads,
    intermediateSize,
    maxPosition,
    vocab,
    tokenEmbeddings: mat(vocabSize, hiddenSize, 0.5),
    positionEmbeddings: mat(maxPosition, hiddenSize, 0.1),
    embeddingNorm: norm(),
    layers,
  };
}
