/**
 * Transformer encoder forward pass.
 *
 * Post-norm residual blocks: h = LN(h + attention(h)), then
 * h = LN(h + ffn(h)). The classifier-position state is recorded after
 * every block so callers can keep the last few layers.
 */

import { addInPlace, affine, gelu, layerNorm, softmaxInPlace } from "./math.js";
import type { AttentionParams, EncoderLayer, EncoderModel } from "./model.js";

/** Multi-head scaled dot-product self-attention plus output projection. */
export function selfAttention(
  h: Float64Array[],
  att: AttentionParams,
  nHeads: number,
): Float64Array[] {
  const seqLen = h.length;
  const d = h[0].length;
  const dHead = d / nHeads;
  const scale = 1.0 / Math.sqrt(dHead);

  const q = h.map((row) => affine(row, att.wq, att.bq));
  const k = h.map((row) => affine(row, att.wk, att.bk));
  const v = h.map((row) => affine(row, att.wv, att.bv));

  const ctx = Array.from({ length: seqLen }, () => new Float64Array(d));
  const scores = new Float64Array(seqLen);
  for (let head = 0; head < nHeads; head++) {
    const lo = head * dHead;
    for (let pos = 0; pos < seqLen; pos++) {
      for (let other = 0; other < seqLen; other++) {
        let dot = 0;
        for (let t = 0; t < dHead; t++) {
          dot += q[pos][lo + t] * k[other][lo + t];
        }
        scores[other] = dot * scale;
      }
      softmaxInPlace(scores);
      const out = ctx[pos];
      for (let other = 0; other < seqLen; other++) {
        const p = scores[other];
        for (let t = 0; t < dHead; t++) {
          out[lo + t] += p * v[other][lo + t];
        }
      }
    }
  }
  return ctx.map((row) => affine(row, att.wo, att.bo));
}

/** One residual block; returns new per-position states. */
export function encoderLayerForward(
  h: Float64Array[],
  layer: EncoderLayer,
  nHeads: number,
): Float64Array[] {
  const attnOut = selfAttention(h, layer.attention, nHeads);
  const mid = h.map((row, pos) => {
    const s = Float64Array.from(row);
    addInPlace(s, attnOut[pos]);
    return layerNorm(s, layer.attentionNorm.gamma, layer.attentionNorm.beta);
  });
  return mid.map((row) => {
    const inner = affine(row, layer.ffn.w1, layer.ffn.b1);
    for (let i = 0; i < inner.length; i++) inner[i] = gelu(inner[i]);
    const ffnOut = affine(inner, layer.ffn.w2, layer.ffn.b2);
    addInPlace(ffnOut, row);
    return layerNorm(ffnOut, layer.ffnNorm.gamma, layer.ffnNorm.beta);
  });
}

/**
 * Run the full stack on one token sequence and return the
 * classifier-position state after every layer, shallowest first.
 */
export function encodeTokens(model: EncoderModel, tokenIds: number[]): Float64Array[] {
  let h = tokenIds.map((id, pos) => {
    const emb = new Float64Array(model.hiddenSize);
    const tok = model.tokenEmbeddings[id];
    const loc = model.positionEmbeddings[pos];
    for (let i = 0; i < emb.length; i++) emb[i] = tok[i] + loc[i];
    return layerNorm(emb, model.embeddingNorm.gamma, model.embeddingNorm.beta);
  });

  const clsStates: Float64Array[] = [];
  for (const layer of model.layers) {
    h = encoderLayerForward(h, layer, model.nHeads);
    clsStates.push(h[0]);
  }
  return clsStates;
}
