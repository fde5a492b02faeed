"""Two-stage federated training loop.

Stage 1 repeats t rounds of: every client trains one local epoch, uploads
its mixed-layer item encodings, the server clusters the union and returns
each item's centroid. Stage 2 fine-tunes each client locally with the
clustered encodings (and optionally their adapter) frozen, early-stopping
on validation Recall@10.

The only thing that ever crosses the client/server boundary is a
FederatedMessage whose payload is an item-level encoding block. No user
ids and no interaction sequences appear anywhere on the type.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .autodiff import Adam, Tensor, backward, no_grad, ops
from .cluster import UploadBatch, cluster, synchronize
from .config import TrainConfig
from .data import InteractionDataset, SplitDataset, leave_one_out_split
from .metrics import MetricsReport, evaluate
from .semantic import EncodingBank
from .seqmodel import ClientModel, ItemTables, predict_scores


class RoundAbort(RuntimeError):
    """A client failed during a federated round; nothing was exchanged."""

    def __init__(self, round_idx: int, client_id, cause: Exception):
        super().__init__(f"round {round_idx} aborted: client {client_id!r} "
                         f"failed: {cause}")
        self.round_idx = round_idx
        self.client_id = client_id
        self.cause = cause


@dataclass(frozen=True)
class FederatedMessage:
    """The complete wire schema; uploads and downloads both use it."""

    kind: str          # "upload" or "download"
    round: int
    client_id: str
    payload: np.ndarray  # item-level encoding block [M, d_W]


def message_checksum(msg: FederatedMessage) -> str:
    return hashlib.sha256(np.ascontiguousarray(msg.payload).tobytes()).hexdigest()


def _log(transcript, msg: FederatedMessage) -> None:
    if transcript is not None:
        transcript.append({"round": msg.round, "kind": msg.kind,
                           "client": msg.client_id,
                           "sha256": message_checksum(msg)})


# -- losses -----------------------------------------------------------------------


def ce_loss(logits: Tensor, targets) -> Tensor:
    """Mean next-item cross entropy over a batch of score rows."""
    targets = np.asarray(targets, dtype=np.int64)
    n_items = logits.shape[-1]
    if targets.size and (targets.min() < 0 or targets.max() >= n_items):
        raise ValueError(f"target ids outside 0..{n_items - 1}")
    return ops.cross_entropy(logits, targets)


def orthogonal_loss(semantic_table: Tensor, id_table: Tensor) -> Tensor:
    """Sum over items of |dot(t_i, e_i)|, pushing the two views apart."""
    if semantic_table.shape != id_table.shape:
        raise ValueError(f"tables {semantic_table.shape} and {id_table.shape} "
                         "are not aligned")
    return ops.sum(ops.abs(ops.sum(ops.mul(semantic_table, id_table), axis=-1)))


def finetune_orthogonal_loss(cluster_table: Tensor, id_table: Tensor) -> Tensor:
    """Same form as orthogonal_loss, applied to the clustered view."""
    if cluster_table.shape != id_table.shape:
        raise ValueError(f"tables {cluster_table.shape} and {id_table.shape} "
                         "are not aligned")
    return ops.sum(ops.abs(ops.sum(ops.mul(cluster_table, id_table), axis=-1)))


# -- client -----------------------------------------------------------------------


class Client:
    """One domain: private sequences, private model, shared item encodings."""

    def __init__(self, client_id: str, bank: EncodingBank, data, config: TrainConfig,
                 index: int = 0):
        if bank.n_layers != config.n_layers:
            raise ValueError(f"bank has {bank.n_layers} layers, config expects "
                             f"{config.n_layers}")
        self.client_id = client_id
        self.bank = bank
        self.config = config
        self.split = data if isinstance(data, SplitDataset) else leave_one_out_split(data)
        if isinstance(data, InteractionDataset) and data.n_items != bank.n_items:
            raise ValueError(f"dataset covers {data.n_items} items but the bank "
                             f"holds {bank.n_items}")
        model_seed = int(np.random.SeedSequence([config.seed, index]).generate_state(1)[0])
        self.model = ClientModel(
            n_items=bank.n_items, d_w=bank.dim, n_layers=config.n_layers,
            d_v=config.d_v, n_experts=config.n_experts, m_max=config.m_max,
            n_filters=config.n_filters, n_blocks=config.n_blocks,
            n_heads=config.n_heads, dropout_rate=config.dropout_rate,
            noise_scale=config.sigma,
            cluster_filter_residual=config.cluster_filter_residual,
            seed=model_seed,
        )
        self.optimizer = Adam(self.model.parameters(), lr=config.lr)
        self.rng = np.random.default_rng([config.seed, index, 1])
        self.x_c: np.ndarray | None = None
        self.step_losses: list = []
        self._pairs = self._teacher_forcing_pairs()

    def _teacher_forcing_pairs(self):
        m_max = self.config.m_max
        pairs = []
        for prefix in self.split.train_prefixes:
            if len(prefix) < 2:
                continue
            window = prefix[-(m_max + 1):]
            pairs.append((np.asarray(window[:-1], dtype=np.int64),
                          np.asarray(window[1:], dtype=np.int64)))
        return pairs

    def _epoch_batches(self):
        order = self.rng.permutation(len(self._pairs))
        buckets: dict = {}
        for idx in order:
            inputs, _ = self._pairs[idx]
            buckets.setdefault(len(inputs), []).append(idx)
        for length in sorted(buckets):
            rows = buckets[length]
            for start in range(0, len(rows), self.config.batch_size):
                chunk = rows[start:start + self.config.batch_size]
                yield (np.stack([self._pairs[i][0] for i in chunk]),
                       np.stack([self._pairs[i][1] for i in chunk]))

    def _cluster_table(self, training: bool, frozen_f):
        if frozen_f is not None:
            return frozen_f
        if self.x_c is not None:
            return self.model.adapted_cluster_table(self.x_c, training=training,
                                                    rng=self.rng)
        return None

    def train_epoch(self, use_finetune_loss: bool = False, frozen_f=None) -> float:
        """One pass over the teacher-forcing pairs; returns the mean loss."""
        cfg = self.config
        total, count = 0.0, 0
        for inputs, targets in self._epoch_batches():
            sem_table, _ = self.model.semantic_tables(self.bank, training=True,
                                                      rng=self.rng)
            tables = ItemTables(self.model.id_table, sem_table,
                                self._cluster_table(True, frozen_f))
            states = self.model.sequence_states(inputs, tables, training=True,
                                                rng=self.rng)
            b, m, _ = states.shape
            logits = ops.reshape(predict_scores(states, tables),
                                 (b * m, self.model.n_items))
            loss = ce_loss(logits, targets.reshape(-1))
            if cfg.use_orthogonal_loss:
                loss = ops.add(loss, orthogonal_loss(sem_table, self.model.id_table))
            if use_finetune_loss and cfg.use_finetune_orthogonal_loss \
                    and tables.cluster_table is not None:
                loss = ops.add(loss, finetune_orthogonal_loss(
                    tables.cluster_table, self.model.id_table))
            self.optimizer.zero_grad()
            backward(loss)
            self.optimizer.step()
            value = loss.item()
            self.step_losses.append(value)
            total += value
            count += 1
        return total / max(count, 1)

    def make_upload(self, round_idx: int) -> FederatedMessage:
        payload = self.model.upload_encodings(self.bank)
        return FederatedMessage(kind="upload", round=round_idx,
                                client_id=self.client_id, payload=payload)

    def receive_download(self, msg: FederatedMessage) -> None:
        if msg.payload.shape != (self.bank.n_items, self.bank.dim):
            raise ValueError(f"download shape {msg.payload.shape} does not match "
                             f"({self.bank.n_items}, {self.bank.dim})")
        self.x_c = np.asarray(msg.payload, dtype=np.float32)

    def make_scorer(self, frozen_f=None, use_cluster: bool = True):
        """Evaluation-mode logit function over full-catalog tables."""
        with no_grad():
            sem_table, _ = self.model.semantic_tables(self.bank, training=False)
            if frozen_f is not None:
                cluster_table = frozen_f
            elif use_cluster and self.x_c is not None:
                cluster_table = self.model.adapted_cluster_table(self.x_c,
                                                                 training=False)
            else:
                cluster_table = None
            tables = ItemTables(self.model.id_table, sem_table, cluster_table)

        def score(batch: np.ndarray) -> np.ndarray:
            with no_grad():
                h = self.model.last_hidden(batch, tables, training=False)
                return predict_scores(h, tables).data

        return score

    def evaluate(self, target: str = "test", cutoffs=(10, 50),
                 frozen_f=None) -> MetricsReport:
        return evaluate(self.make_scorer(frozen_f=frozen_f), self.split,
                        cutoffs=cutoffs, target=target,
                        max_len=self.config.m_max)


# -- server -----------------------------------------------------------------------


class Server:
    """Holds no model: clusters whatever encodings arrive, sends centroids back."""

    def __init__(self, k: int, cluster_iters: int = 50, shift_tol: float = 0.0,
                 epsilon: float = 1e-8, seed: int = 0, exchange_dir=None):
        self.k = k
        self.cluster_iters = cluster_iters
        self.shift_tol = shift_tol
        self.epsilon = epsilon
        self.seed = seed
        self.exchange_dir = exchange_dir
        self.last_model = None

    def _round_trip(self, payload: np.ndarray, name: str) -> np.ndarray:
        """Optionally pass a payload through an on-disk MLSE file."""
        if self.exchange_dir is None:
            return payload
        from .mlse import read_bank, write_bank

        path = f"{self.exchange_dir}/{name}.mlse"
        write_bank(path, EncodingBank(payload[:, None, :]))
        return read_bank(path).values[:, 0, :]

    def handle_round(self, uploads, round_idx: int) -> dict:
        batches = []
        for msg in uploads:
            payload = self._round_trip(msg.payload,
                                       f"round{round_idx}_upload_{msg.client_id}")
            batches.append(UploadBatch(client_id=msg.client_id, encodings=payload))
        rng = np.random.default_rng([self.seed, round_idx])
        self.last_model = cluster(batches, k=self.k, max_iters=self.cluster_iters,
                                  shift_tol=self.shift_tol, epsilon=self.epsilon,
                                  rng=rng)
        downloads = {}
        for batch in batches:
            payload = self._round_trip(synchronize(self.last_model, batch),
                                       f"round{round_idx}_download_{batch.client_id}")
            downloads[batch.client_id] = FederatedMessage(
                kind="download", round=round_idx, client_id=batch.client_id,
                payload=payload)
        return downloads


# -- orchestration ------------------------------------------------------------------


def pretrain_round(clients, server: Server, config: TrainConfig, round_idx: int,
                   transcript=None) -> dict:
    """Local epochs in parallel, then the barrier exchange."""
    with ThreadPoolExecutor(max_workers=len(clients)) as pool:
        futures = [(client, pool.submit(client.train_epoch)) for client in clients]
        losses = {}
        failure = None
        for client, fut in futures:
            try:
                losses[client.client_id] = fut.result()
            except Exception as exc:  # noqa: BLE001 - reported via RoundAbort
                if failure is None:
                    failure = RoundAbort(round_idx, client.client_id, exc)
    if failure is not None:
        raise failure

    uploads = []
    for client in clients:
        try:
            msg = client.make_upload(round_idx)
        except Exception as exc:  # noqa: BLE001
            raise RoundAbort(round_idx, client.client_id, exc) from exc
        _log(transcript, msg)
        uploads.append(msg)

    downloads = server.handle_round(uploads, round_idx)
    for client in clients:
        msg = downloads[client.client_id]
        _log(transcript, msg)
        client.receive_download(msg)
    return {"round": round_idx, "losses": losses}


def pretrain(clients, server: Server, config: TrainConfig, transcript=None) -> list:
    """Stage 1: t rounds of train / upload / cluster / download."""
    return [pretrain_round(clients, server, config, r, transcript=transcript)
            for r in range(config.pretrain_rounds)]


def local_pretrain(client: Client, config: TrainConfig) -> list:
    """No-federation baseline: the same number of local epochs, no exchange.

    This is the ablation that drops cross-domain fusion. The client never
    uploads, never receives centroids, and later fine-tunes with
    ``use_cluster=False`` so the clustered view stays out of the model.
    """
    return [{"round": r, "losses": {client.client_id: client.train_epoch()}}
            for r in range(config.pretrain_rounds)]


@dataclass
class FinetuneResult:
    state: dict
    best_valid_recall: float
    n_evaluations: int
    history: list


def finetune(client: Client, config: TrainConfig,
             use_cluster: bool = True) -> FinetuneResult:
    """Stage 2: local training with frozen clustered encodings, early stop on
    validation Recall@10, best checkpoint restored and returned.

    ``use_cluster=False`` drops the clustered view entirely (the no-fusion
    ablation): no frozen table, no clustered-view orthogonal term, zero
    cluster contribution inside the sequence model.
    """
    if not use_cluster:
        client.x_c = None
        frozen_f = None
        trainable = client.model.parameters()
    elif client.x_c is None:
        raise ValueError("fine-tuning requires clustered encodings; "
                         "run pretraining first")
    elif config.freeze_cluster_adapter:
        with no_grad():
            frozen_f = client.model.adapted_cluster_table(client.x_c,
                                                          training=False)
        frozen_f = frozen_f.detach()
        frozen = {name for name, _ in
                  client.model.cluster_adapter.named_parameters("cluster_adapter")}
        trainable = [p for name, p in client.model.named_parameters()
                     if name not in frozen]
    else:
        frozen_f = None
        trainable = client.model.parameters()
    client.optimizer = Adam(trainable, lr=config.lr)

    best_state = None
    best_recall = -1.0
    bad_evals = 0
    evaluations = 0
    history = []
    for epoch in range(config.finetune_epochs):
        mean_loss = client.train_epoch(use_finetune_loss=True, frozen_f=frozen_f)
        report = client.evaluate(target="valid", cutoffs=(10,), frozen_f=frozen_f)
        recall = report.recall[10]
        evaluations += 1
        history.append({"epoch": epoch, "loss": mean_loss,
                        "valid_recall10": recall})
        if recall > best_recall:
            best_recall = recall
            bad_evals = 0
            best_state = {name: p.data.copy()
                          for name, p in client.model.named_parameters()}
        else:
            bad_evals += 1
            if bad_evals >= config.patience:
                break

    for name, p in client.model.named_parameters():
        p.data = best_state[name]
    state = dict(best_state)
    if client.x_c is not None:
        state["state.x_c"] = client.x_c.copy()
    return FinetuneResult(state=state, best_valid_recall=best_recall,
                          n_evaluations=evaluations, history=history)
