import { describe, expect, it } from "vitest";

import { encodeTokens, encoderLayerForward, selfAttention } from "../src/encoder.js";
import type { AttentionParams, EncoderLayer } from "../src/model.js";
import { buildToyModel } from "../src/toymodel.js";

/**
 * Frozen single-layer oracle: hidden 4, two heads, intermediate 3,
 * sequence length 3. Expected outputs were computed with an independent
 * float64 reference implementation of the same equations.
 */
const ORACLE_LAYER: EncoderLayer = {
  attention: {
    wq: [
      [0.02, 0.338, 0.14, -0.258],
      [0.111, -0.288, 0.264, -0.015],
      [-0.055, -0.204, 0.367, -0.046],
      [-0.128, -0.106, 0.16, 0.11],
    ],
    bq: [-0.128, 0.048, 0.188, -0.093],
    wk: [
      [0.124, 0.129, 0.642, -0.122],
      [-0.154, -0.244, 0.185, 0.339],
      [-0.034, -0.252, -0.247, 0.195],
      [0.223, 0.163, -0.2, 0.07],
    ],
    bk: [0.137, -0.199, -0.109, -0.115],
    wv: [
      [0.035, 0.066, 0.261, 0.067],
      [0.204, 0.02, 0.087, 0.189],
      [-0.437, -0.096, -0.141, -0.192],
      [-0.083, 0.448, -0.26, 0.29],
    ],
    bv: [-0.359, 0.146, -0.141, 0.004],
    wo: [
      [-0.505, -0.1, 0.049, 0.176],
      [0.213, 0.238, -0.105, -0.139],
      [0.257, -0.057, -0.383, -0.34],
      [-0.276, 0.149, 0.043, 0.207],
    ],
    bo: [0.144, 0.134, 0.2, -0.03],
  },
  attentionNorm: {
    gamma: [0.873, 0.976, 0.494, 0.566],
    beta: [-0.397, -0.299, 0.12, -0.272],
  },
  ffn: {
    w1: [
      [-0.113, 0.39, -0.107],
      [0.221, -0.28, -0.062],
      [-0.285, -0.102, 0.252],
      [-0.518, 0.13, 0.071],
    ],
    b1: [-0.178, -0.434, 0.022],
    w2: [
      [-0.159, 0.07, 0.007, 0.481],
      [-0.072, -0.307, 0.054, 0.066],
      [0.408, 0.251, 0.107, 0.439],
    ],
    b2: [-0.357, -0.192, -0.278, -0.117],
  },
  ffnNorm: {
    gamma: [0.587, 1.191, 0.933, 0.559],
    beta: [-0.305, 0.094, 0.251, 0.599],
  },
};

const ORACLE_INPUT = [
  Float64Array.from([0.152, -0.52, 0.375, 0.47]),
  Float64Array.from([-0.976, -0.651, 0.064, -0.158]),
  Float64Array.from([-0.008, -0.427, 0.44, 0.389]),
];

const ORACLE_OUTPUT = [
  [-0.009687506394, -1.914467961437, 1.10022886162, 0.751646252329],
  [-1.00029487171, -0.53701913686, 1.657836989954, 0.714404315654],
  [-0.176942565698, -1.80207916113, 1.346202527164, 0.710799852341],
];

describe("encoderLayerForward", () => {
  it("matches the frozen two-head reference layer", () => {
    const got = encoderLayerForward(ORACLE_INPUT, ORACLE_LAYER, 2);
    expect(got).toHaveLength(3);
    for (let pos = 0; pos < 3; pos++) {
      for (let d = 0; d < 4; d++) {
        expect(got[pos][d]).toBeCloseTo(ORACLE_OUTPUT[pos][d], 9);
      }
    }
  });

  it("produces identical states when all positions share one embedding", () => {
    const row = Float64Array.from([0.3, -0.1, 0.2, 0.5]);
    const h = [row, Float64Array.from(row), Float64Array.from(row)];
    const got = encoderLayerForward(h, ORACLE_LAYER, 2);
    for (let d = 0; d < 4; d++) {
      expect(got[1][d]).toBe(got[0][d]);
      expect(got[2][d]).toBe(got[0][d]);
    }
  });
});

describe("selfAttention", () => {
  it("averages value rows when query and key weights vanish", () => {
    const zeros = [
      [0, 0, 0, 0],
      [0, 0, 0, 0],
      [0, 0, 0, 0],
      [0, 0, 0, 0],
    ];
    const eye = [
      [1, 0, 0, 0],
      [0, 1, 0, 0],
      [0, 0, 1, 0],
      [0, 0, 0, 1],
    ];
    const att: AttentionParams = {
      wq: zeros,
      bq: [0, 0, 0, 0],
      wk: zeros,
      bk: [0, 0, 0, 0],
      wv: eye,
      bv: [0, 0, 0, 0],
      wo: eye,
      bo: [0, 0, 0, 0],
    };
    const h = [
      Float64Array.from([1, 2, 3, 4]),
      Float64Array.from([5, 6, 7, 8]),
      Float64Array.from([9, 10, 11, 12]),
    ];
    for (const nHeads of [1, 2, 4]) {
      const got = selfAttention(h, att, nHeads);
      for (const row of got) {
        expect(row[0]).toBeCloseTo(5, 12);
        expect(row[1]).toBeCloseTo(6, 12);
        expect(row[2]).toBeCloseTo(7, 12);
        expect(row[3]).toBeCloseTo(8, 12);
      }
    }
  });
});

describe("encodeTokens", () => {
  it("returns one classifier state per layer, shallowest first", () => {
    const model = buildToyModel({ seed: 3, hiddenSize: 8, nLayers: 3, nHeads: 2 });
    const states = encodeTokens(model, [0, 2, 3]);
    expect(states).toHaveLength(3);
    for (const s of states) {
      expect(s).toHaveLength(8);
      for (const v of s) expect(Number.isFinite(v)).toBe(true);
    }
    expect(Array.from(states[0])).not.toEqual(Array.from(states[2]));
  });

  it("is deterministic bit for bit", () => {
    const model = buildToyModel({ seed: 11 });
    const a = encodeTokens(model, [0, 2, 5, 7]);
    const b = encodeTokens(model, [0, 2, 5, 7]);
    for (let layer = 0; layer < a.length; layer++) {
      expect(Array.from(a[layer])).toEqual(Array.from(b[layer]));
    }
  });

  it("depends on token order", () => {
    const model = buildToyModel({ seed: 4 });
    const ab = encodeTokens(model, [0, 2, 3]);
    const ba = encodeTokens(model, [0, 3, 2]);
    const last = ab.length - 1;
    expect(Array.from(ab[last])).not.toEqual(Array.from(ba[last]));
  });
});
