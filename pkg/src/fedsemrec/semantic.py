"""Semantic extraction: raw multi-layer encodings to model-space tables.

A client holds one raw encoding per item per kept language-model layer
(the EncodingBank). This module turns those into

* per-layer semantic embeddings via mixture-of-experts adapters,
* the mixed semantic table T via an ID-guided fusion block, and
* the mixed-layer raw encodings uploaded to the server (a plain array,
  never on the gradient tape).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, ops


@dataclass
class EncodingBank:
    """Per-item raw encodings, ``[n_items, n_layers, dim]``, layer 0 the
    shallowest kept layer and the last index the final encoder layer."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3:
            raise ValueError(f"expected [n_items, n_layers, dim], got {self.values.shape}")
        if self.values.shape[1] < 1:
            raise ValueError("bank needs at least one layer")
        if not np.isfinite(self.values).all():
            raise ValueError("bank contains non-finite values")

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_layers(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def layer(self, j: int) -> np.ndarray:
        return self.values[:, j, :]


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class MoEAdapter:
    """Multi-expert whitening transform with noisy softmax gating.

    Each expert maps a raw ``dim`` encoding to a ``d_v`` embedding as
    ``(dropout(x) - b_k) @ W_k``; the gate mixes experts with
    ``softmax(x @ W_gate + noise)``, the noise drawn only in training.
    """

    def __init__(self, dim: int, d_v: int, n_experts: int = 2,
                 noise_scale: float = 1.0, dropout_rate: float = 0.0,
                 rng: np.random.Generator | None = None):
        if n_experts < 1:
            raise ValueError("need at least one expert")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        rng = rng or np.random.default_rng(0)
        self.dim = dim
        self.d_v = d_v
        self.n_experts = n_experts
        self.noise_scale = noise_scale
        self.dropout_rate = dropout_rate
        self.expert_weights = [
            Tensor(_uniform(rng, (dim, d_v), dim), requires_grad=True)
            for _ in range(n_experts)
        ]
        self.expert_shifts = [
            Tensor(np.zeros(dim), requires_grad=True) for _ in range(n_experts)
        ]
        self.gate_weight = Tensor(_uniform(rng, (dim, n_experts), dim), requires_grad=True)

    def named_parameters(self, prefix: str = "adapter"):
        out = []
        for k in range(self.n_experts):
            out.append((f"{prefix}.expert{k}.weight", self.expert_weights[k]))
            out.append((f"{prefix}.expert{k}.shift", self.expert_shifts[k]))
        out.append((f"{prefix}.gate.weight", self.gate_weight))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def forward_batch(self, x: Tensor, training: bool = False,
                      rng: np.random.Generator | None = None) -> Tensor:
        """Adapt a block of encodings ``[n, dim]`` to embeddings ``[n, d_v]``."""
        if x.shape[-1] != self.dim:
            raise ValueError(f"encoding width {x.shape[-1]} != adapter dim {self.dim}")
        gate_logits = ops.matmul(x, self.gate_weight)
        if training and self.noise_scale > 0.0:
            if rng is None:
                raise ValueError("training mode needs an RNG for gate noise")
            noise = rng.normal(scale=self.noise_scale, size=gate_logits.shape)
            gate_logits = ops.add(gate_logits, Tensor(noise))
        gate = ops.softmax(gate_logits, axis=-1)
        dropped = ops.dropout(x, self.dropout_rate, rng, training=training)
        mixed = None
        for k in range(self.n_experts):
            whitened = ops.matmul(ops.sub(dropped, self.expert_shifts[k]),
                                  self.expert_weights[k])
            term = ops.mul(ops.slice_cols(gate, k, k + 1), whitened)
            mixed = term if mixed is None else ops.add(mixed, term)
        return mixed


def moe_adapter_forward(adapter: MoEAdapter, x, training: bool = False,
                        rng: np.random.Generator | None = None) -> Tensor:
    """Single-encoding adapter pass: ``[dim]`` in, ``[d_v]`` out."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 1:
        raise ValueError(f"expected a single encoding row, got shape {x.shape}")
    out = adapter.forward_batch(ops.reshape(x, (1, x.shape[0])), training, rng)
    return ops.reshape(out, (out.shape[1],))


class FusionBlock:
    """Scores each kept layer per item, guided by the frozen ID embedding."""

    def __init__(self, d_v: int, rng: np.random.Generator | None = None,
                 leak: float = 0.01):
        rng = rng or np.random.default_rng(0)
        self.d_v = d_v
        self.leak = leak
        self.w1 = Tensor(_uniform(rng, (2 * d_v, d_v), 2 * d_v), requires_grad=True)
        self.b1 = Tensor(np.zeros(d_v), requires_grad=True)
        self.w2 = Tensor(_uniform(rng, (d_v, 1), d_v), requires_grad=True)
        self.b2 = Tensor(np.zeros(1), requires_grad=True)

    def named_parameters(self, prefix: str = "fusion"):
        return [
            (f"{prefix}.w1", self.w1),
            (f"{prefix}.b1", self.b1),
            (f"{prefix}.w2", self.w2),
            (f"{prefix}.b2", self.b2),
        ]

    def parameters(self):
        return [p for _, p in self.named_parameters()]


def fusion_weights_batch(block: FusionBlock, id_embs: Tensor,
                         layer_embs: list[Tensor]) -> Tensor:
    """Softmax layer weights ``[n, a]`` for each item.

    ``id_embs`` is detached here: the ID table stays frozen with respect
    to the layer-scoring path, whatever the caller passed in.
    """
    if not layer_embs:
        raise ValueError("need at least one layer embedding")
    frozen_ids = id_embs.detach()
    scores = []
    for emb in layer_embs:
        joint = ops.concat([frozen_ids, emb], axis=-1)
        hidden = ops.leaky_relu(ops.add(ops.matmul(joint, block.w1), block.b1),
                                slope=block.leak)
        scores.append(ops.add(ops.matmul(hidden, block.w2), block.b2))
    return ops.softmax(ops.concat(scores, axis=-1), axis=-1)


def fusion_weights(block: FusionBlock, id_emb, layer_embs) -> Tensor:
    """Per-item wrapper: one ID embedding, ``a`` layer embeddings -> ``[a]``."""
    id_emb = id_emb if isinstance(id_emb, Tensor) else Tensor(id_emb)
    rows = [ops.reshape(e if isinstance(e, Tensor) else Tensor(e), (1, -1))
            for e in layer_embs]
    w = fusion_weights_batch(block, ops.reshape(id_emb, (1, -1)), rows)
    return ops.reshape(w, (w.shape[1],))


def fuse_embeddings(weights: Tensor, layer_embs: list[Tensor]) -> Tensor:
    """Weighted mix of layer embeddings; works per item or batched.

    ``weights`` is ``[a]`` with ``layer_embs`` a list of ``[d_v]`` rows, or
    ``[n, a]`` with ``[n, d_v]`` blocks.
    """
    a = len(layer_embs)
    if weights.shape[-1] != a:
        raise ValueError(f"{a} layers but weight width {weights.shape[-1]}")
    batched = weights.ndim == 2
    mixed = None
    for j, emb in enumerate(layer_embs):
        w_j = ops.slice_cols(weights, j, j + 1) if batched \
            else ops.slice_rows(weights, j, j + 1)
        term = ops.mul(w_j, emb)
        mixed = term if mixed is None else ops.add(mixed, term)
    return mixed


def fuse_encodings(weights: np.ndarray, bank: EncodingBank) -> np.ndarray:
    """Mixed-layer RAW encodings ``[n_items, dim]`` for the server upload.

    Plain ndarray in, plain ndarray out: this path is off the tape by
    construction, so no gradient can ever flow through an upload.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[0] != bank.n_items:
        raise ValueError(
            f"need one weight row per item: {weights.shape} vs {bank.n_items} items"
        )
    if weights.shape[1] != bank.n_layers:
        raise ValueError(f"{bank.n_layers} layers but weight width {weights.shape[1]}")
    mixed = np.einsum("na,nad->nd", weights, bank.values.astype(np.float64))
    return mixed.astype(np.float32)
