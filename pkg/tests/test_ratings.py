import numpy as np
import pytest

from cimf import build_dataset


def test_interning_first_appearance():
    ds = build_dataset(
        [("bob", "x", 3.0), ("alice", "y", 4.0), ("bob", "y", 2.0)],
        (1.0, 5.0),
    )
    assert ds.user_labels == ["bob", "alice"]
    assert ds.item_labels == ["x", "y"]
    assert ds.user_id("alice") == 1
    assert ds.item_id("zzz") is None


def test_interning_round_trip():
    triples = [("u%d" % i, "i%d" % (i % 3), float(1 + i % 5)) for i in range(10)]
    ds = build_dataset(triples, (1.0, 5.0))
    for u, i, r in zip(ds.user_ids, ds.item_ids, ds.values):
        assert ds.user_id(ds.user_labels[u]) == u
        assert ds.item_id(ds.item_labels[i]) == i


def test_catalog_items_preseed_id_space():
    ds = build_dataset(
        [("u", "rated", 3.0), ("u", "extra", 4.0)],
        (1.0, 5.0),
        item_labels=["unrated", "rated"],
    )
    assert ds.item_labels == ["unrated", "rated", "extra"]
    assert ds.n_items == 3
    mask = ds.rated_item_mask()
    assert mask.tolist() == [False, True, True]


def test_duplicate_last_wins():
    ds = build_dataset(
        [("u", "x", 2.0), ("u", "x", 5.0), ("v", "x", 3.0)],
        (1.0, 5.0),
    )
    assert ds.duplicate_count == 1
    assert ds.n_ratings == 2
    assert ds.values[0] == 5.0  # the later rating replaced the earlier one


def test_out_of_range_rejected():
    with pytest.raises(ValueError, match="outside"):
        build_dataset([("u", "x", 9.0)], (1.0, 5.0))


def test_subset_shares_interning():
    ds = build_dataset(
        [("a", "x", 1.0), ("b", "y", 2.0), ("a", "y", 3.0)],
        (1.0, 5.0),
    )
    sub = ds.subset(np.array([True, False, True]))
    assert sub.user_labels is ds.user_labels
    assert sub.n_ratings == 2
    assert sub.values.tolist() == [1.0, 3.0]


def test_global_mean_and_clamp():
    ds = build_dataset([("a", "x", 1.0), ("b", "x", 4.0)], (1.0, 5.0))
    assert ds.global_mean() == pytest.approx(2.5)
    assert ds.clamp(9.3) == 5.0
    assert ds.clamp(-2.0) == 1.0
    empty = ds.subset(np.zeros(2, dtype=bool))
    with pytest.raises(ValueError):
        empty.global_mean()
