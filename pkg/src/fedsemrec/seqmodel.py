"""Per-client sequence network.

Per position, a user's history mixes three item views: the filtered
clustered embedding, the sigmoid-gated ID embedding, and the mixed-layer
semantic embedding. The sum runs through filter layers and a causally
masked transformer; the last hidden state scores all items against T + E.

Sequences are processed at their live length (batches hold equal-length
sequences), so storage padding never reaches any computation and the
frequency filter always sees exactly the interactions that happened.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, ops, spectral_filter
from .semantic import EncodingBank, FusionBlock, MoEAdapter, _uniform, \
    fuse_embeddings, fuse_encodings, fusion_weights_batch

NEG_INF = -1e9


class FilterLayer:
    """Learnable frequency response, optionally wrapped in
    dropout + residual + layer norm."""

    def __init__(self, d_v: int, m_max: int, dropout_rate: float = 0.0):
        self.d_v = d_v
        self.m_max = m_max
        self.dropout_rate = dropout_rate
        bins = m_max // 2 + 1
        # identity response at start: training begins as an unfiltered model
        self.w_re = Tensor(np.ones((bins, d_v)), requires_grad=True)
        self.w_im = Tensor(np.zeros((bins, d_v)), requires_grad=True)
        self.ln_scale = Tensor(np.ones(d_v), requires_grad=True)
        self.ln_shift = Tensor(np.zeros(d_v), requires_grad=True)

    def named_parameters(self, prefix: str = "filter"):
        return [
            (f"{prefix}.w_re", self.w_re),
            (f"{prefix}.w_im", self.w_im),
            (f"{prefix}.ln_scale", self.ln_scale),
            (f"{prefix}.ln_shift", self.ln_shift),
        ]

    def parameters(self):
        return [p for _, p in self.named_parameters()]


def filter_forward(layer: FilterLayer, x: Tensor, with_residual: bool = True,
                   training: bool = False,
                   rng: np.random.Generator | None = None) -> Tensor:
    """Filter a ``[m, d_v]`` or ``[B, m, d_v]`` sequence in frequency space."""
    m = x.shape[-2]
    if m < 1:
        raise ValueError("cannot filter an empty sequence")
    if m > layer.m_max:
        raise ValueError(f"sequence length {m} exceeds maximum {layer.m_max}")
    filtered = spectral_filter(x, layer.w_re, layer.w_im)
    if not with_residual:
        return filtered
    dropped = ops.dropout(filtered, layer.dropout_rate, rng, training=training)
    return ops.layer_norm(ops.add(x, dropped), layer.ln_scale, layer.ln_shift)


class GateLayer:
    """Scalar sigmoid gate re-weighting each ID embedding."""

    def __init__(self, d_v: int, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.weight = Tensor(_uniform(rng, (d_v, 1), d_v), requires_grad=True)

    def named_parameters(self, prefix: str = "gate"):
        return [(f"{prefix}.weight", self.weight)]

    def parameters(self):
        return [self.weight]

    def forward(self, e: Tensor) -> Tensor:
        return ops.mul(ops.sigmoid(ops.matmul(e, self.weight)), e)


def gate_forward(gate: GateLayer, e) -> Tensor:
    """Single-embedding gate pass: ``[d_v]`` in, ``[d_v]`` out."""
    e = e if isinstance(e, Tensor) else Tensor(e)
    out = gate.forward(ops.reshape(e, (1, e.shape[-1])))
    return ops.reshape(out, (out.shape[-1],))


def combine(f_tilde: Tensor, e_gated: Tensor, t: Tensor) -> Tensor:
    """Three-way additive mix of the per-position item views."""
    return ops.add(ops.add(f_tilde, e_gated), t)


class TransformerBlock:
    """Post-norm block: causal multi-head attention, then a GELU MLP."""

    def __init__(self, d_v: int, n_heads: int, rng: np.random.Generator,
                 dropout_rate: float = 0.0):
        if d_v % n_heads != 0:
            raise ValueError(f"width {d_v} not divisible by {n_heads} heads")
        self.d_v = d_v
        self.n_heads = n_heads
        self.dropout_rate = dropout_rate
        inner = 4 * d_v
        self.wq = Tensor(_uniform(rng, (d_v, d_v), d_v), requires_grad=True)
        self.wk = Tensor(_uniform(rng, (d_v, d_v), d_v), requires_grad=True)
        self.wv = Tensor(_uniform(rng, (d_v, d_v), d_v), requires_grad=True)
        self.wo = Tensor(_uniform(rng, (d_v, d_v), d_v), requires_grad=True)
        self.ln1_scale = Tensor(np.ones(d_v), requires_grad=True)
        self.ln1_shift = Tensor(np.zeros(d_v), requires_grad=True)
        self.ffn_w1 = Tensor(_uniform(rng, (d_v, inner), d_v), requires_grad=True)
        self.ffn_b1 = Tensor(np.zeros(inner), requires_grad=True)
        self.ffn_w2 = Tensor(_uniform(rng, (inner, d_v), inner), requires_grad=True)
        self.ffn_b2 = Tensor(np.zeros(d_v), requires_grad=True)
        self.ln2_scale = Tensor(np.ones(d_v), requires_grad=True)
        self.ln2_shift = Tensor(np.zeros(d_v), requires_grad=True)
        self.last_attention: np.ndarray | None = None

    def named_parameters(self, prefix: str = "block"):
        names = ["wq", "wk", "wv", "wo", "ln1_scale", "ln1_shift",
                 "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2", "ln2_scale", "ln2_shift"]
        return [(f"{prefix}.{n}", getattr(self, n)) for n in names]

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def forward(self, x: Tensor, mask: Tensor, training: bool,
                rng: np.random.Generator | None) -> Tensor:
        b, m, d = x.shape
        h, dh = self.n_heads, self.d_v // self.n_heads

        def split_heads(t):
            return ops.transpose(ops.reshape(t, (b, m, h, dh)), (0, 2, 1, 3))

        q = split_heads(ops.matmul(x, self.wq))
        k = split_heads(ops.matmul(x, self.wk))
        v = split_heads(ops.matmul(x, self.wv))
        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))),
                         1.0 / np.sqrt(dh))
        weights = ops.softmax(ops.add(scores, mask), axis=-1)
        self.last_attention = weights.data
        weights = ops.dropout(weights, self.dropout_rate, rng, training=training)
        ctx = ops.reshape(ops.transpose(ops.matmul(weights, v), (0, 2, 1, 3)),
                          (b, m, d))
        attn_out = ops.dropout(ops.matmul(ctx, self.wo), self.dropout_rate, rng,
                               training=training)
        x = ops.layer_norm(ops.add(x, attn_out), self.ln1_scale, self.ln1_shift)
        hidden = ops.gelu(ops.add(ops.matmul(x, self.ffn_w1), self.ffn_b1))
        ffn_out = ops.add(ops.matmul(hidden, self.ffn_w2), self.ffn_b2)
        ffn_out = ops.dropout(ffn_out, self.dropout_rate, rng, training=training)
        return ops.layer_norm(ops.add(x, ffn_out), self.ln2_scale, self.ln2_shift)


class TransformerStack:
    """Positional embeddings plus L causally masked transformer blocks."""

    def __init__(self, d_v: int, m_max: int, n_blocks: int = 2, n_heads: int = 2,
                 dropout_rate: float = 0.0, causal: bool = True,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.d_v = d_v
        self.m_max = m_max
        self.causal = causal
        self.dropout_rate = dropout_rate
        self.pos_table = Tensor(_uniform(rng, (m_max, d_v), d_v), requires_grad=True)
        self.blocks = [TransformerBlock(d_v, n_heads, rng, dropout_rate)
                       for _ in range(n_blocks)]
        self._masks: dict[int, Tensor] = {}

    def named_parameters(self, prefix: str = "encoder"):
        out = [(f"{prefix}.pos_table", self.pos_table)]
        for i, blk in enumerate(self.blocks):
            out.extend(blk.named_parameters(f"{prefix}.block{i}"))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def _mask(self, m: int) -> Tensor:
        if m not in self._masks:
            if self.causal:
                mask = np.triu(np.full((m, m), NEG_INF, dtype=np.float32), k=1)
            else:
                mask = np.zeros((m, m), dtype=np.float32)
            self._masks[m] = Tensor(mask)
        return self._masks[m]

    def last_attention(self) -> list[np.ndarray]:
        return [blk.last_attention for blk in self.blocks]


def encode_states(stack: TransformerStack, filters: list[FilterLayer], v: Tensor,
                  training: bool = False,
                  rng: np.random.Generator | None = None) -> Tensor:
    """All-position hidden states ``[B, m, d_v]`` (or ``[m, d_v]`` in = out)."""
    squeeze = v.ndim == 2
    if squeeze:
        v = ops.reshape(v, (1,) + tuple(v.shape))
    m = v.shape[-2]
    if m < 1:
        raise ValueError("cannot encode an empty sequence")
    if m > stack.m_max:
        raise ValueError(f"sequence length {m} exceeds maximum {stack.m_max}")
    for layer in filters:
        v = filter_forward(layer, v, with_residual=True, training=training, rng=rng)
    v = ops.add(v, ops.slice_rows(stack.pos_table, 0, m))
    v = ops.dropout(v, stack.dropout_rate, rng, training=training)
    mask = stack._mask(m)
    for block in stack.blocks:
        v = block.forward(v, mask, training, rng)
    if squeeze:
        v = ops.reshape(v, (m, stack.d_v))
    return v


def encode_sequence(stack: TransformerStack, filters: list[FilterLayer], v: Tensor,
                    training: bool = False,
                    rng: np.random.Generator | None = None) -> Tensor:
    """Hidden state of the most recent position: ``[d_v]``, or ``[B, d_v]``."""
    states = encode_states(stack, filters, v, training=training, rng=rng)
    m = states.shape[-2]
    last = ops.slice_time(states, m - 1, m)
    if states.ndim == 2:
        return ops.reshape(last, (stack.d_v,))
    return ops.reshape(last, (states.shape[0], stack.d_v))


@dataclass
class ItemTables:
    """The three aligned per-item tables: learned IDs, mixed semantics,
    adapted cluster encodings (absent before the first download)."""

    id_table: Tensor
    semantic_table: Tensor
    cluster_table: Tensor | None = None


def predict_scores(h: Tensor, tables: ItemTables) -> Tensor:
    """Logits over all items: ``h @ (T + E)^T``. The cluster table takes no
    part in scoring."""
    head = ops.add(tables.semantic_table, tables.id_table)
    return ops.matmul(h, ops.transpose(head, (1, 0)))


class ClientModel:
    """One domain's full parameter set."""

    def __init__(self, n_items: int, d_w: int, n_layers: int, d_v: int,
                 n_experts: int = 2, m_max: int = 50, n_filters: int = 2,
                 n_blocks: int = 2, n_heads: int = 2, dropout_rate: float = 0.0,
                 noise_scale: float = 1.0, cluster_filter_residual: bool = False,
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        self.n_items = n_items
        self.d_w = d_w
        self.n_layers = n_layers
        self.d_v = d_v
        self.m_max = m_max
        self.cluster_filter_residual = cluster_filter_residual
        self.layer_adapters = [
            MoEAdapter(d_w, d_v, n_experts, noise_scale, dropout_rate, rng)
            for _ in range(n_layers)
        ]
        self.cluster_adapter = MoEAdapter(d_w, d_v, n_experts, noise_scale,
                                          dropout_rate, rng)
        self.fusion = FusionBlock(d_v, rng)
        self.id_table = Tensor(_uniform(rng, (n_items, d_v), d_v), requires_grad=True)
        self.gate = GateLayer(d_v, rng)
        self.cluster_filter = FilterLayer(d_v, m_max, dropout_rate)
        self.encoder_filters = [FilterLayer(d_v, m_max, dropout_rate)
                                for _ in range(n_filters)]
        self.encoder = TransformerStack(d_v, m_max, n_blocks, n_heads,
                                        dropout_rate, causal=True, rng=rng)

    def named_parameters(self):
        out = []
        for j, ad in enumerate(self.layer_adapters):
            out.extend(ad.named_parameters(f"layer_adapter{j}"))
        out.extend(self.cluster_adapter.named_parameters("cluster_adapter"))
        out.extend(self.fusion.named_parameters("fusion"))
        out.append(("id_table", self.id_table))
        out.extend(self.gate.named_parameters("gate"))
        out.extend(self.cluster_filter.named_parameters("cluster_filter"))
        for i, f in enumerate(self.encoder_filters):
            out.extend(f.named_parameters(f"encoder_filter{i}"))
        out.extend(self.encoder.named_parameters("encoder"))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    # -- table construction -------------------------------------------------

    def semantic_tables(self, bank: EncodingBank, training: bool = False,
                        rng: np.random.Generator | None = None):
        """Mixed semantic table T ``[M, d_v]`` plus the per-item layer weights."""
        layer_embs = [
            ad.forward_batch(Tensor(bank.layer(j)), training=training, rng=rng)
            for j, ad in enumerate(self.layer_adapters)
        ]
        weights = fusion_weights_batch(self.fusion, self.id_table, layer_embs)
        return fuse_embeddings(weights, layer_embs), weights

    def upload_encodings(self, bank: EncodingBank) -> np.ndarray:
        """Mixed-layer raw encodings for the server, evaluation mode, off-tape."""
        from .autodiff import no_grad

        with no_grad():
            _, weights = self.semantic_tables(bank, training=False)
        return fuse_encodings(weights.data, bank)

    def adapted_cluster_table(self, x_c: np.ndarray, training: bool = False,
                              rng: np.random.Generator | None = None) -> Tensor:
        """F ``[M, d_v]``: the cluster adapter applied to downloaded centroids."""
        if x_c.shape != (self.n_items, self.d_w):
            raise ValueError(f"clustered encodings {x_c.shape} do not match "
                             f"({self.n_items}, {self.d_w})")
        return self.cluster_adapter.forward_batch(Tensor(x_c), training=training,
                                                  rng=rng)

    # -- sequence encoding ----------------------------------------------------

    def sequence_states(self, seqs: np.ndarray, tables: ItemTables,
                        training: bool = False,
                        rng: np.random.Generator | None = None) -> Tensor:
        """Hidden states ``[B, m, d_v]`` for equal-length id rows ``[B, m]``."""
        seqs = np.asarray(seqs, dtype=np.int64)
        if seqs.ndim != 2:
            raise ValueError(f"expected [B, m] item ids, got {seqs.shape}")
        t_seq = ops.gather_rows(tables.semantic_table, seqs)
        e_seq = self.gate.forward(ops.gather_rows(tables.id_table, seqs))
        if tables.cluster_table is not None:
            f_seq = filter_forward(
                self.cluster_filter,
                ops.gather_rows(tables.cluster_table, seqs),
                with_residual=self.cluster_filter_residual,
                training=training, rng=rng,
            )
        else:
            # no download has happened yet: the clustered view contributes zero
            f_seq = Tensor(np.zeros(t_seq.shape, dtype=np.float32))
        v = combine(f_seq, e_seq, t_seq)
        return encode_states(self.encoder, self.encoder_filters, v,
                             training=training, rng=rng)

    def last_hidden(self, seqs: np.ndarray, tables: ItemTables,
                    training: bool = False,
                    rng: np.random.Generator | None = None) -> Tensor:
        states = self.sequence_states(seqs, tables, training=training, rng=rng)
        m = states.shape[-2]
        last = ops.slice_time(states, m - 1, m)
        return ops.reshape(last, (states.shape[0], self.d_v))


# -- checkpoint file -----------------------------------------------------------

_CKPT_MAGIC = b"FSR1"
_CKPT_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray]) -> None:
    """Versioned binary dump: named little-endian float32 tensors."""
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", _CKPT_VERSION, len(arrays)))
        for name, arr in arrays.items():
            data = np.asarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n_bytes = 4 * int(np.prod(shape)) if ndim else 4
            data = np.frombuffer(fh.read(n_bytes), dtype="<f4").reshape(shape)
            arrays[name] = data.copy()
    return arrays


def model_state(model: ClientModel) -> dict[str, np.ndarray]:
    return {name: p.data for name, p in model.named_parameters()}


def load_model_state(model: ClientModel, arrays: dict[str, np.ndarray]) -> None:
    for name, p in model.named_parameters():
        if name not in arrays:
            raise ValueError(f"checkpoint is missing parameter {name!r}")
        if tuple(arrays[name].shape) != tuple(p.data.shape):
            raise ValueError(f"checkpoint shape {arrays[name].shape} does not "
                             f"match parameter {name!r} {p.data.shape}")
        p.data = np.ascontiguousarray(arrays[name], dtype=p.data.dtype)
