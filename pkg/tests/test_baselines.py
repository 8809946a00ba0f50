import numpy as np
import pytest

from cimf import (
    CouplingConfig,
    MethodSpec,
    TrainingConfig,
    build_dataset,
    build_space,
    cf_predict,
    run_method,
)


def spec(kind, **mf_kwargs):
    coupling = mf_kwargs.pop("coupling", CouplingConfig(neighborhood_size=2))
    return MethodSpec(
        kind,
        mf_config=TrainingConfig(latent_dim=2, max_epochs=30, **mf_kwargs),
        cf_neighbors=mf_kwargs.get("cf_neighbors", 1),
        coupling=coupling,
    )


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="unknown method"):
        MethodSpec("svd++")


def test_plain_mf_equals_cimf_with_zero_alpha(demo):
    ratings, space = demo
    test_set = ratings.subset(ratings.user_ids == ratings.user_id("u3"))
    a = run_method(spec("plain-mf", seed=5), ratings, space, test_set)
    b = run_method(spec("cimf", alpha=0.0, seed=5), ratings, space, test_set)
    assert a == b


def test_empty_test_set(demo):
    ratings, space = demo
    empty = ratings.subset(np.zeros(ratings.n_ratings, dtype=bool))
    assert run_method(spec("plain-mf"), ratings, space, empty) == []


def test_mf_cold_pair_flagged(demo):
    ratings, space = demo
    u3 = ratings.user_id("u3")
    train_set = ratings.subset(ratings.user_ids != u3)
    test_set = ratings.subset(ratings.user_ids == u3)
    preds = run_method(spec("plain-mf"), train_set, space, test_set)
    assert all(p.fallback for p in preds)
    assert all(p.predicted == pytest.approx(train_set.global_mean()) for p in preds)


def test_predictions_within_rating_range(demo):
    ratings, space = demo
    for kind in ("cimf", "plain-mf", "ubcf", "ibcf"):
        preds = run_method(spec(kind), ratings, space, ratings)
        for p in preds:
            assert 1.0 <= p.predicted <= 5.0


# ---------------------------------------------------------------------------
# neighborhood CF
# ---------------------------------------------------------------------------

def test_ubcf_hand_case(demo):
    ratings, _ = demo
    u3 = ratings.user_id("u3")
    gf = ratings.item_id("GodFather")
    # both co-raters correlate perfectly on the two shared items; the tie
    # breaks to the lower user id, whose GodFather rating is 1:
    # mean(u3)=3 plus (1 - mean(u1)=3.25) = 0.75
    value, fallback = cf_predict("ubcf", ratings, u3, gf, 1)
    assert value == pytest.approx(0.75)
    assert fallback is False


def test_ibcf_hand_case(demo):
    ratings, _ = demo
    u3 = ratings.user_id("u3")
    v = ratings.item_id("Vertigo")
    # item neighbors among u3's rated items: GoodFellas (+1), NbyNW (-1);
    # K=1 keeps GoodFellas: mean(V)=3 plus (2 - mean(GoF)=7/3) = 8/3
    value, fallback = cf_predict("ibcf", ratings, u3, v, 1)
    assert value == pytest.approx(8 / 3)
    assert fallback is False


def test_ubcf_single_user_returns_their_mean():
    ds = build_dataset([("solo", "x", 2.0), ("solo", "y", 4.0)], (1.0, 5.0))
    value, fallback = cf_predict("ubcf", ds, 0, ds.item_id("y"), 3)
    assert value == pytest.approx(3.0)
    assert fallback is False


def test_ubcf_identical_vectors_recenter():
    ds = build_dataset(
        [
            ("a", "x", 2.0), ("a", "y", 4.0), ("a", "z", 3.0),
            ("b", "x", 2.0), ("b", "y", 4.0),
        ],
        (1.0, 5.0),
    )
    # b's profile matches a's exactly on the overlap: pearson 1, so the
    # prediction for (b, z) is mean(b) + (r_az - mean(a))
    value, fallback = cf_predict("ubcf", ds, ds.user_id("b"), ds.item_id("z"), 1)
    assert value == pytest.approx(3.0 + (3.0 - 3.0))
    assert fallback is False


def test_cf_unknown_user_falls_back_to_global_mean(demo):
    ratings, _ = demo
    value, fallback = cf_predict("ubcf", ratings, 99, 0, 1)
    assert value == pytest.approx(ratings.global_mean())
    assert fallback is True
    value, fallback = cf_predict("ibcf", ratings, 0, 99, 1)
    assert fallback is True


def test_cf_no_qualifying_neighbor_uses_base_mean():
    # overlap below 2 everywhere: no pearson weight qualifies
    ds = build_dataset(
        [("a", "x", 5.0), ("b", "x", 1.0), ("b", "y", 3.0)],
        (1.0, 5.0),
    )
    value, fallback = cf_predict("ubcf", ds, ds.user_id("a"), ds.item_id("y"), 2)
    assert value == pytest.approx(5.0)  # a's own mean
    assert fallback is False


def test_cf_validation(demo):
    ratings, _ = demo
    with pytest.raises(ValueError):
        cf_predict("svd", ratings, 0, 0, 1)
    with pytest.raises(ValueError):
        cf_predict("ubcf", ratings, 0, 0, 0)


# ---------------------------------------------------------------------------
# hybrid degeneracy: when every similarity kind produces the same
# neighborhoods and weights, every MF-family method coincides
# ---------------------------------------------------------------------------

def test_hybrids_coincide_on_twin_pair_fixture():
    space = build_space(
        [
            ("t0", ["a1", "b1"]),
            ("t1", ["a1", "b1"]),
            ("t2", ["a2", "b2"]),
            ("t3", ["a2", "b2"]),
        ],
        ["first", "second"],
    )
    triples = [
        ("u0", "t0", 4.0), ("u0", "t2", 2.0),
        ("u1", "t1", 5.0), ("u1", "t3", 1.0),
        ("u2", "t0", 4.0), ("u2", "t3", 2.0),
        ("u3", "t1", 3.0), ("u3", "t2", 2.0),
    ]
    ratings = build_dataset(triples, (1.0, 5.0))
    test_set = ratings.subset(np.arange(ratings.n_ratings) < 2)
    coupling = CouplingConfig(neighborhood_size=1)
    results = {}
    for kind in ("cimf", "psmf", "csmf", "jsmf"):
        method = MethodSpec(
            kind,
            mf_config=TrainingConfig(latent_dim=2, max_epochs=25, seed=3),
            coupling=coupling,
        )
        results[kind] = run_method(method, ratings, space, test_set)
    assert results["cimf"] == results["psmf"] == results["csmf"] == results["jsmf"]
