"""Interaction datasets: ingestion, five-core filtering, holdout splitting.

Sequences are chronological per user. Filtering iterates to a fixed point:
dropping a sparse user can push an item below the threshold, which can
drop further users, so one pass is not enough.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field


class EmptyDatasetError(ValueError):
    """Filtering removed every interaction."""


@dataclass
class InteractionDataset:
    sequences: list  # per user, ordered dense item ids
    n_users: int
    n_items: int
    domain: str = ""
    user_ids: list = field(default_factory=list)  # original ids, dense order
    item_ids: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.sequences) != self.n_users:
            raise ValueError(f"{len(self.sequences)} sequences for "
                             f"{self.n_users} users")
        for seq in self.sequences:
            for item in seq:
                if not 0 <= item < self.n_items:
                    raise ValueError(f"item id {item} outside 0..{self.n_items - 1}")

    @property
    def n_interactions(self) -> int:
        return sum(len(s) for s in self.sequences)


def five_core_filter(raw_sequences, domain: str = "", min_count: int = 5
                     ) -> InteractionDataset:
    """Iteratively drop users and items with fewer than five interactions.

    raw_sequences: list of (user_id, [item_id, ...]) in chronological order
    per user. Surviving ids are renumbered densely, in order of first
    appearance, so a second application is the identity.
    """
    current = [(user, list(items)) for user, items in raw_sequences]
    while True:
        item_counts = Counter()
        for _, items in current:
            item_counts.update(items)
        kept_items = {it for it, c in item_counts.items() if c >= min_count}
        changed = len(kept_items) < len(item_counts)
        pruned = []
        for user, items in current:
            remaining = [it for it in items if it in kept_items]
            if len(remaining) >= min_count:
                pruned.append((user, remaining))
            else:
                changed = True
        current = pruned
        if not changed:
            break
    if not current:
        raise EmptyDatasetError("five-core filtering removed every interaction")

    item_index: dict = {}
    user_ids, item_ids, sequences = [], [], []
    for user, items in current:
        user_ids.append(user)
        row = []
        for it in items:
            if it not in item_index:
                item_index[it] = len(item_ids)
                item_ids.append(it)
            row.append(item_index[it])
        sequences.append(row)
    return InteractionDataset(sequences=sequences, n_users=len(sequences),
                              n_items=len(item_ids), domain=domain,
                              user_ids=user_ids, item_ids=item_ids)


@dataclass
class SplitDataset:
    """Per kept user: training prefix, validation target, test target.

    The validation context is the training prefix; the test context is the
    prefix plus the validation target.
    """

    train_prefixes: list
    valid_targets: list
    test_targets: list
    n_items: int
    n_excluded: int = 0
    domain: str = ""

    @property
    def n_users(self) -> int:
        return len(self.train_prefixes)

    def valid_context(self, u: int) -> list:
        return self.train_prefixes[u]

    def test_context(self, u: int) -> list:
        return self.train_prefixes[u] + [self.valid_targets[u]]


def leave_one_out_split(ds: InteractionDataset) -> SplitDataset:
    """Last item = test target, second-to-last = validation target.

    Users with fewer than 3 interactions cannot donate both holdouts and are
    excluded; the count is reported on the split.
    """
    prefixes, valid_targets, test_targets = [], [], []
    excluded = 0
    for seq in ds.sequences:
        if len(seq) < 3:
            excluded += 1
            continue
        prefixes.append(list(seq[:-2]))
        valid_targets.append(seq[-2])
        test_targets.append(seq[-1])
    return SplitDataset(train_prefixes=prefixes, valid_targets=valid_targets,
                        test_targets=test_targets, n_items=ds.n_items,
                        n_excluded=excluded, domain=ds.domain)


# -- file formats -----------------------------------------------------------------


def read_sequences(path) -> list:
    """One user per line: `user_id<TAB>item_id,item_id,...` (UTF-8)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected user_id<TAB>items")
            user, items = line.split("\t", 1)
            item_list = [it for it in items.split(",") if it]
            rows.append((user, item_list))
    return rows


def write_sequences(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for user, items in rows:
            fh.write(f"{user}\t{','.join(str(it) for it in items)}\n")


def read_catalog(path) -> list:
    """One item per line: `item_id<TAB>description text`."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected item_id<TAB>text")
            item, text = line.split("\t", 1)
            rows.append((item, text))
    return rows


def dataset_rows(ds: InteractionDataset) -> list:
    """Dense-id rows in the sequences-file shape, for round-tripping."""
    users = ds.user_ids or list(range(ds.n_users))
    return [(users[u], ds.sequences[u]) for u in range(ds.n_users)]
