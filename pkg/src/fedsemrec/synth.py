"""Two-domain synthetic benchmark generator.

Both domains draw their items from the same latent topic set (the shared
structure the federation is supposed to exploit) but have disjoint item and
user spaces. Item encodings are topic centers plus Gaussian noise, one
center per layer; user histories follow a per-user topic Markov chain.
Everything derives from one seeded generator, so a seed pins every byte.
"""

from __future__ import annotations

import numpy as np

from .data import InteractionDataset
from .semantic import EncodingBank


def synth_generate(n_topics: int, n_items: int, n_users: int, d_w: int = 16,
                   n_layers: int = 3, seed: int = 0, encoding_noise: float = 0.1,
                   min_len: int = 6, max_len: int = 12, stay_prob: float = 0.8,
                   interaction_noise: float = 0.0, popularity_skew: float = 0.0,
                   domains=("A", "B")):
    """Returns (datasets, banks, topic_labels), one entry per domain.

    ``popularity_skew`` > 0 draws items within a topic with Zipf-like
    weights (rank^-skew), so each domain has head items and a cold tail;
    0 keeps the uniform draw.
    """
    if n_topics < 2:
        raise ValueError(f"need at least 2 topics, got {n_topics}")
    if n_items < n_topics:
        raise ValueError(f"{n_items} items cannot cover {n_topics} topics")
    if n_users < 1 or min_len < 3 or max_len < min_len:
        raise ValueError("need n_users >= 1 and 3 <= min_len <= max_len")
    if not 0.0 <= interaction_noise <= 1.0 or encoding_noise < 0.0:
        raise ValueError("noise levels must be fractions")
    if popularity_skew < 0.0:
        raise ValueError("popularity_skew must be non-negative")

    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_layers, n_topics, d_w))

    datasets, banks, labels = [], [], []
    for domain in domains:
        topics = rng.permutation(np.arange(n_items) % n_topics)
        values = np.empty((n_items, n_layers, d_w), dtype=np.float32)
        for layer in range(n_layers):
            jitter = encoding_noise * rng.normal(size=(n_items, d_w))
            values[:, layer, :] = centers[layer][topics] + jitter
        by_topic = [np.flatnonzero(topics == t) for t in range(n_topics)]
        weights = None
        if popularity_skew > 0.0:
            weights = []
            for members in by_topic:
                ranks = np.arange(1, len(members) + 1, dtype=np.float64)
                w = ranks ** -popularity_skew
                weights.append(w / w.sum())

        sequences = []
        for _ in range(n_users):
            length = int(rng.integers(min_len, max_len + 1))
            topic = int(rng.integers(n_topics))
            row = []
            for _ in range(length):
                if rng.random() >= stay_prob:
                    topic = int(rng.integers(n_topics))
                if weights is None:
                    row.append(int(rng.choice(by_topic[topic])))
                else:
                    row.append(int(rng.choice(by_topic[topic], p=weights[topic])))
            sequences.append(row)

        if interaction_noise > 0.0:
            # corrupt history only; the two held-out targets stay clean
            for row in sequences:
                for pos in range(len(row) - 2):
                    if rng.random() < interaction_noise:
                        row[pos] = int(rng.integers(n_items))

        datasets.append(InteractionDataset(sequences=sequences, n_users=n_users,
                                           n_items=n_items, domain=str(domain)))
        banks.append(EncodingBank(values))
        labels.append(topics)
    return datasets, banks, labels
