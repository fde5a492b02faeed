"""Multi-layer semantic encoding files.

Layout, all little-endian: magic "MLSE", u32 version = 1, u32 n_items,
u32 n_layers, u32 dim, then n_items * n_layers * dim float32 values,
item-major then layer-major (layer 0 = shallowest kept layer). Fixed
layout, seekable, language-neutral.
"""

from __future__ import annotations

import struct

import numpy as np

from .semantic import EncodingBank

MAGIC = b"MLSE"
VERSION = 1


def write_bank(path, bank: EncodingBank) -> None:
    values = np.ascontiguousarray(bank.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", VERSION, bank.n_items, bank.n_layers,
                             bank.dim))
        fh.write(values.tobytes())


def read_bank(path) -> EncodingBank:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, not an MLSE file")
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated header")
        version, n_items, n_layers, dim = struct.unpack("<IIII", header)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        count = n_items * n_layers * dim
        payload = fh.read(4 * count)
        if len(payload) != 4 * count:
            raise ValueError(f"{path}: expected {count} floats, file truncated")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(n_items, n_layers, dim)
    return EncodingBank(values.copy())
