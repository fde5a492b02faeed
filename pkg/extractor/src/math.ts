/** Dense float64 helpers for the encoder forward pass. */

const LAYER_NORM_EPS = 1e-12;
const GELU_C = Math.sqrt(2.0 / Math.PI);

/** Tanh-form gaussian error linear unit. */
export function gelu(x: number): number {
  return 0.5 * x * (1.0 + Math.tanh(GELU_C * (x + 0.044715 * x * x * x)));
}

/** y = x W + b where w is indexed [input][output]. */
export function affine(x: Float64Array, w: number[][], b: number[]): Float64Array {
  const out = Float64Array.from(b);
  for (let i = 0; i < x.length; i++) {
    const xi = x[i];
    const row = w[i];
    for (let j = 0; j < out.length; j++) {
      out[j] += xi * row[j];
    }
  }
  return out;
}

/** Normalize over the feature axis, then scale and shift. Non-destructive. */
export function layerNorm(x: Float64Array, gamma: number[], beta: number[]): Float64Array {
  let mean = 0;
  for (const v of x) mean += v;
  mean /= x.length;
  let variance = 0;
  for (const v of x) variance += (v - mean) * (v - mean);
  variance /= x.length;
  const inv = 1.0 / Math.sqrt(variance + LAYER_NORM_EPS);
  const out = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) {
    out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
  }
  return out;
}

/** Stable softmax, overwriting the scores. */
export function softmaxInPlace(x: Float64Array): void {
  let max = -Infinity;
  for (const v of x) if (v > max) max = v;
  let total = 0;
  for (let i = 0; i < x.length; i++) {
    x[i] = Math.exp(x[i] - max);
    total += x[i];
  }
  for (let i = 0; i < x.length; i++) {
    x[i] /= total;
  }
}

export function addInPlace(x: Float64Array, y: Float64Array): void {
  for (let i = 0; i < x.length; i++) x[i] += y[i];
}
