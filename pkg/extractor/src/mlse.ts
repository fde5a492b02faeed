/**
 * Multi-layer semantic encoding files.
 *
 * Layout, all little-endian: magic "MLSE", u32 version = 1, u32 n_items,
 * u32 n_layers, u32 dim, then n_items * n_layers * dim float32 values,
 * item-major then layer-major (layer 0 = shallowest kept layer).
 */

import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = "MLSE";
export const VERSION = 1;

const HEADER_BYTES = 20;

export interface Bank {
  nItems: number;
  nLayers: number;
  dim: number;
  values: Float32Array;
}

/** Serialize a bank into its exact byte layout. */
export function packBank(
  values: Float32Array,
  nItems: number,
  nLayers: number,
  dim: number,
): Buffer {
  const count = nItems * nLayers * dim;
  if (values.length !== count) {
    throw new Error(`bank value count ${values.length} does not match header ${count}`);
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * count);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(nItems, 8);
  buf.writeUInt32LE(nLayers, 12);
  buf.writeUInt32LE(dim, 16);
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(values[i], HEADER_BYTES + 4 * i);
  }
  return buf;
}

export function writeBank(
  path: string,
  values: Float32Array,
  nItems: number,
  nLayers: number,
  dim: number,
): void {
  writeFileSync(path, packBank(values, nItems, nLayers, dim));
}

export function readBank(path: string): Bank {
  const buf = readFileSync(path);
  if (buf.length < HEADER_BYTES || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic, not an MLSE file`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const nItems = buf.readUInt32LE(8);
  const nLayers = buf.readUInt32LE(12);
  const dim = buf.readUInt32LE(16);
  const count = nItems * nLayers * dim;
  if (buf.length < HEADER_BYTES + 4 * count) {
    throw new Error(`${path}: expected ${count} floats, file truncated`);
  }
  if (buf.length > HEADER_BYTES + 4 * count) {
    throw new Error(`${path}: trailing bytes after payload`);
  }
  const values = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    values[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
  }
  return { nItems, nLayers, dim, values };
}
