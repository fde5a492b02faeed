"""Full-ranking evaluation: Recall@N and NDCG@N over the whole catalog.

Every item competes in the ranking (no negative sampling). Ties are broken
by lower item id so a checkpoint always evaluates to the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    recall: dict
    ndcg: dict
    n_users: int

    def as_records(self, phase: str = "evaluate", domain: str = "",
                   round_idx: int = -1) -> list:
        records = []
        for n in sorted(self.recall):
            records.append({"phase": phase, "round": round_idx, "domain": domain,
                            "metric": f"recall@{n}", "value": self.recall[n]})
            records.append({"phase": phase, "round": round_idx, "domain": domain,
                            "metric": f"ndcg@{n}", "value": self.ndcg[n]})
        records.append({"phase": phase, "round": round_idx, "domain": domain,
                        "metric": "n_users", "value": self.n_users})
        return records


def rank_of_target(logits: np.ndarray, target: int) -> int:
    """1-based rank of the target under full sorting, lower id wins ties."""
    gt = logits[target]
    higher = int(np.count_nonzero(logits > gt))
    tied_before = int(np.count_nonzero(logits[:target] == gt))
    return 1 + higher + tied_before


def metrics_from_ranks(ranks, cutoffs=(10, 50)) -> MetricsReport:
    ranks = np.asarray(list(ranks), dtype=np.int64)
    recall, ndcg = {}, {}
    for n in cutoffs:
        hit = ranks <= n
        recall[n] = float(hit.mean()) if ranks.size else 0.0
        gains = np.where(hit, 1.0 / np.log2(ranks + 1.0), 0.0)
        ndcg[n] = float(gains.mean()) if ranks.size else 0.0
    return MetricsReport(recall=recall, ndcg=ndcg, n_users=int(ranks.size))


def evaluate(score_batch, split, cutoffs=(10, 50), target: str = "test",
             max_len: int | None = None, mask_history: bool = False
             ) -> MetricsReport:
    """Rank each user's held-out item against the full catalog.

    score_batch maps an equal-length id batch [B, m] to logits [B, M].
    Contexts are left-truncated to max_len, then bucketed by length so no
    padding ever reaches the scorer.
    """
    if target == "test":
        contexts = [split.test_context(u) for u in range(split.n_users)]
        targets = list(split.test_targets)
    elif target == "valid":
        contexts = [split.valid_context(u) for u in range(split.n_users)]
        targets = list(split.valid_targets)
    else:
        raise ValueError(f"unknown evaluation target {target!r}")

    if max_len is not None:
        contexts = [c[-max_len:] for c in contexts]

    buckets: dict = {}
    for u, ctx in enumerate(contexts):
        buckets.setdefault(len(ctx), []).append(u)

    ranks = np.zeros(len(contexts), dtype=np.int64)
    for length in sorted(buckets):
        users = buckets[length]
        batch = np.array([contexts[u] for u in users], dtype=np.int64)
        logits = np.asarray(score_batch(batch))
        for row, u in enumerate(users):
            user_logits = logits[row]
            if mask_history:
                user_logits = user_logits.copy()
                history = [it for it in contexts[u] if it != targets[u]]
                user_logits[history] = -np.inf
            ranks[u] = rank_of_target(user_logits, targets[u])
    return metrics_from_ranks(ranks, cutoffs)
