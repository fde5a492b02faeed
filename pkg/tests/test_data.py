"""Dataset filtering, splitting, and file round-trips."""

import numpy as np
import pytest

from fedsemrec.data import (
    EmptyDatasetError,
    InteractionDataset,
    dataset_rows,
    five_core_filter,
    leave_one_out_split,
    read_catalog,
    read_sequences,
    write_sequences,
)


# -- brute-force fixed-point oracle -------------------------------------------------


def oracle_five_core(rows, min_count=5):
    """Set-based survivor computation: recount everything until stable."""
    users = {user: list(items) for user, items in rows}
    alive_users = set(users)
    alive_items = {it for items in users.values() for it in items}
    while True:
        counts = {}
        for user in alive_users:
            for it in users[user]:
                if it in alive_items:
                    counts[it] = counts.get(it, 0) + 1
        next_items = {it for it in alive_items if counts.get(it, 0) >= min_count}
        next_users = set()
        for user in alive_users:
            kept = [it for it in users[user] if it in next_items]
            if len(kept) >= min_count:
                next_users.add(user)
        if next_users == alive_users and next_items == alive_items:
            break
        alive_users, alive_items = next_users, next_items
    return {user: [it for it in users[user] if it in alive_items]
            for user in alive_users}


def _as_original(ds: InteractionDataset):
    return {ds.user_ids[u]: [ds.item_ids[it] for it in ds.sequences[u]]
            for u in range(ds.n_users)}


# -- five-core filter -----------------------------------------------------------


def test_five_core_keeps_dense_data_unchanged():
    rows = [(f"u{u}", [f"i{(u + k) % 5}" for k in range(5)]) for u in range(5)]
    ds = five_core_filter(rows)
    assert ds.n_users == 5 and ds.n_items == 5
    assert _as_original(ds) == dict(rows)


def test_five_core_drops_short_user_keeps_popular_items():
    rows = [(f"u{u}", ["a", "b", "c", "d", "e"]) for u in range(5)]
    rows.append(("light", ["a", "b", "c", "d"]))
    ds = five_core_filter(rows)
    assert "light" not in ds.user_ids
    assert sorted(ds.item_ids) == ["a", "b", "c", "d", "e"]


def test_five_core_cascade_matches_brute_force_oracle():
    # dropping "bridge" pushes item "x" below 5, which drops "chain"
    rows = [(f"u{u}", ["a", "b", "c", "d", "e"]) for u in range(5)]
    rows.append(("bridge", ["a", "b", "x", "x"]))
    rows.append(("chain", ["x", "x", "x", "a", "b"]))
    expected = oracle_five_core(rows)
    assert "bridge" not in expected and "chain" not in expected
    ds = five_core_filter(rows)
    assert _as_original(ds) == expected


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_five_core_random_instances_match_oracle(seed):
    rng = np.random.default_rng(seed)
    rows = [(f"u{u}", [f"i{rng.integers(0, 12)}"
                       for _ in range(rng.integers(2, 9))])
            for u in range(30)]
    expected = oracle_five_core(rows)
    if not expected:
        with pytest.raises(EmptyDatasetError):
            five_core_filter(rows)
        return
    assert _as_original(five_core_filter(rows)) == expected


def test_five_core_is_idempotent():
    rng = np.random.default_rng(3)
    rows = [(f"u{u}", [f"i{rng.integers(0, 8)}" for _ in range(rng.integers(4, 10))])
            for u in range(25)]
    once = five_core_filter(rows)
    twice = five_core_filter(dataset_rows(once))
    assert twice.sequences == once.sequences
    assert twice.n_users == once.n_users and twice.n_items == once.n_items


def test_five_core_empty_result_is_an_error():
    with pytest.raises(EmptyDatasetError):
        five_core_filter([("u0", ["a", "b"]), ("u1", ["c"])])


def test_dataset_validates_item_range():
    with pytest.raises(ValueError):
        InteractionDataset(sequences=[[0, 3]], n_users=1, n_items=3)
    with pytest.raises(ValueError):
        InteractionDataset(sequences=[[0], [1]], n_users=1, n_items=2)


# -- leave-one-out split -----------------------------------------------------------


def test_split_five_item_sequence_example():
    ds = InteractionDataset(sequences=[[0, 1, 2, 3, 4]], n_users=1, n_items=5)
    split = leave_one_out_split(ds)
    assert split.train_prefixes == [[0, 1, 2]]
    assert split.valid_targets == [3] and split.test_targets == [4]
    assert split.valid_context(0) == [0, 1, 2]
    assert split.test_context(0) == [0, 1, 2, 3]


def test_split_length_three_gives_single_item_prefix():
    ds = InteractionDataset(sequences=[[2, 0, 1]], n_users=1, n_items=3)
    split = leave_one_out_split(ds)
    assert split.train_prefixes == [[2]]
    assert split.valid_targets == [0] and split.test_targets == [1]


def test_split_excludes_short_users_with_count():
    ds = InteractionDataset(sequences=[[0, 1], [0, 1, 2], [2]], n_users=3,
                            n_items=3)
    split = leave_one_out_split(ds)
    assert split.n_users == 1 and split.n_excluded == 2


def test_split_sizes_reconcile_on_random_instances():
    rng = np.random.default_rng(4)
    seqs = [[int(rng.integers(0, 20)) for _ in range(rng.integers(1, 12))]
            for _ in range(100)]
    ds = InteractionDataset(sequences=seqs, n_users=100, n_items=20)
    split = leave_one_out_split(ds)
    long_enough = [s for s in seqs if len(s) >= 3]
    assert split.n_users == len(long_enough)
    assert split.n_excluded == 100 - len(long_enough)
    assert sum(len(p) for p in split.train_prefixes) == \
        sum(len(s) - 2 for s in long_enough)
    for u, seq in enumerate(long_enough):
        assert split.train_prefixes[u] == seq[:-2]
        assert split.valid_targets[u] == seq[-2]
        assert split.test_targets[u] == seq[-1]


# -- file formats ----------------------------------------------------------------


def test_sequences_file_round_trip(tmp_path):
    rows = [("alice", ["3", "1", "4"]), ("bob", ["1", "5"])]
    path = tmp_path / "seqs.tsv"
    write_sequences(path, rows)
    assert read_sequences(path) == rows
    assert path.read_text().splitlines() == ["alice\t3,1,4", "bob\t1,5"]


def test_sequences_file_rejects_missing_tab(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("justonefield\n")
    with pytest.raises(ValueError):
        read_sequences(path)


def test_catalog_reader_keeps_tabs_in_description(tmp_path):
    path = tmp_path / "catalog.tsv"
    path.write_text("0\tred shoes, size 9\n1\tdesc with\ttab\n")
    rows = read_catalog(path)
    assert rows == [("0", "red shoes, size 9"), ("1", "desc with\ttab")]
