import numpy as np
import pytest

from cimf import (
    CouplingConfig,
    MethodSpec,
    TrainingConfig,
    evaluate_grid,
    improvement,
    mae,
    make_folds,
    rmse,
)

from corpus import preference_corpus


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------

def test_folds_balanced(demo):
    ratings, _ = demo  # 10 records
    plan = make_folds(ratings, 5, seed=1)
    sizes = np.bincount(plan.assignments, minlength=5)
    assert sizes.tolist() == [2, 2, 2, 2, 2]


def test_folds_reproducible(demo):
    ratings, _ = demo
    a = make_folds(ratings, 5, seed=42)
    b = make_folds(ratings, 5, seed=42)
    assert np.array_equal(a.assignments, b.assignments)
    c = make_folds(ratings, 5, seed=43)
    assert not np.array_equal(a.assignments, c.assignments)


def test_folds_two_way_split(demo):
    ratings, _ = demo
    plan = make_folds(ratings, 2, seed=0)
    train_set, test_set = plan.train_test(ratings, 0)
    assert train_set.n_ratings == 5 and test_set.n_ratings == 5
    pairs = set(zip(train_set.user_ids.tolist(), train_set.item_ids.tolist()))
    test_pairs = set(zip(test_set.user_ids.tolist(), test_set.item_ids.tolist()))
    assert not pairs & test_pairs


def test_folds_validation(demo):
    ratings, _ = demo
    with pytest.raises(ValueError):
        make_folds(ratings, 1, seed=0)
    with pytest.raises(ValueError):
        make_folds(ratings, 11, seed=0)
    plan = make_folds(ratings, 2, seed=0)
    with pytest.raises(ValueError):
        plan.train_test(ratings, 2)


def test_folds_sizes_differ_by_at_most_one():
    rng = np.random.default_rng(3)
    from cimf import build_dataset

    for n in (7, 23, 101):
        triples = [(f"u{i}", f"i{i}", 3.0) for i in range(n)]
        ds = build_dataset(triples, (1.0, 5.0))
        for k in (2, 3, 5):
            plan = make_folds(ds, k, seed=int(rng.integers(1 << 30)))
            sizes = np.bincount(plan.assignments, minlength=k)
            assert sizes.max() - sizes.min() <= 1
            assert sizes.sum() == n


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_rmse_examples():
    assert rmse([(3.0, 3.0), (1.0, 1.0)]) == 0.0
    assert rmse([(1.0, 2.0), (3.0, 3.0)]) == pytest.approx(np.sqrt(0.5))
    assert rmse([(4.0, 1.0)]) == 3.0
    with pytest.raises(ValueError):
        rmse([])


def test_mae_examples():
    assert mae([(3.0, 3.0)]) == 0.0
    assert mae([(1.0, 2.0), (3.0, 3.0)]) == 0.5
    assert mae([(4.0, 1.0)]) == 3.0
    with pytest.raises(ValueError):
        mae([])


def test_rmse_dominates_mae_on_random_residuals():
    rng = np.random.default_rng(17)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        actual = rng.uniform(1, 5, n)
        predicted = actual + rng.normal(0, 1.0, n)
        pairs = list(zip(actual.tolist(), predicted.tolist()))
        assert rmse(pairs) >= mae(pairs) - 1e-12


def test_improvement_is_difference_times_hundred():
    assert round(improvement(1.1787, 0.9002), 2) == 27.85
    assert round(improvement(1.7111, 1.0058), 2) == 70.53
    assert round(improvement(1.5127, 1.4763), 2) == 3.64
    assert round(improvement(1.8051, 1.2551), 2) == 55.00
    assert round(improvement(1.2129, 1.0496), 2) == 16.33
    assert round(improvement(3.7455, 3.7386), 2) == 0.69
    assert round(improvement(1.5135, 1.4763), 2) == 3.72
    assert improvement(2.0, 2.0) == 0.0
    # worse candidates come out negative
    assert improvement(1.0022, 1.0058) == pytest.approx(-0.36, abs=1e-9)


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def grid_methods():
    mf = TrainingConfig(latent_dim=2, max_epochs=25)
    coupling = CouplingConfig(neighborhood_size=1)
    return [
        MethodSpec("plain-mf", mf_config=mf, coupling=coupling),
        MethodSpec("cimf", mf_config=mf, coupling=coupling),
    ]


def test_grid_cell_count(demo):
    ratings, space = demo
    report, _ = evaluate_grid(ratings, space, grid_methods(), dims=[2], folds=2, seed=0)
    assert len(report.cells) == 4  # 2 methods x 1 dim x 2 folds
    csv_text = report.to_csv()
    assert csv_text.splitlines()[0] == "method,dim,fold,rmse,mae,fallback_rate"
    assert len(csv_text.splitlines()) == 5


def test_grid_deterministic(demo):
    ratings, space = demo
    a, _ = evaluate_grid(ratings, space, grid_methods(), dims=[2], folds=2, seed=9)
    b, _ = evaluate_grid(ratings, space, grid_methods(), dims=[2], folds=2, seed=9)
    assert a.to_csv() == b.to_csv()


def test_grid_cf_methods_ignore_dims(demo):
    ratings, space = demo
    methods = grid_methods() + [MethodSpec("ubcf", cf_neighbors=1)]
    report, _ = evaluate_grid(ratings, space, methods, dims=[2, 3], folds=2, seed=0)
    ubcf_cells = [c for c in report.cells if c.method == "ubcf"]
    assert len(ubcf_cells) == 2  # one per fold, dims collapsed
    assert all(c.dim == 0 for c in ubcf_cells)


def test_grid_failed_cell_is_recorded(demo):
    ratings, space = demo  # 3 users: latent_dim 5 cannot train
    methods = [MethodSpec("plain-mf", mf_config=TrainingConfig(latent_dim=2))]
    report, _ = evaluate_grid(ratings, space, methods, dims=[5], folds=2, seed=0)
    assert all(c.failed for c in report.cells)
    assert "latent_dim" in report.cells[0].error
    assert "nan" in report.to_csv()


def test_grid_reference_defaults_to_plain_mf(demo):
    ratings, space = demo
    report, _ = evaluate_grid(ratings, space, grid_methods(), dims=[2], folds=2, seed=0)
    assert report.reference_method == "plain-mf"
    table = report.to_table()
    assert "cimf (improve)" in table
    assert "RMSE" in table and "MAE" in table


def test_grid_keep_predictions(demo):
    ratings, space = demo
    report, preds = evaluate_grid(
        ratings, space, grid_methods(), dims=[2], folds=2, seed=0, keep_predictions=True
    )
    assert set(preds) == {("plain-mf", 2, 0), ("plain-mf", 2, 1), ("cimf", 2, 0), ("cimf", 2, 1)}
    total = sum(len(v) for k, v in preds.items() if k[0] == "cimf")
    assert total == ratings.n_ratings  # the two test folds partition the records


def test_grid_fallback_rate_counts_cold_pairs(demo):
    ratings, space = demo
    report, preds = evaluate_grid(
        ratings, space, grid_methods(), dims=[2], folds=2, seed=0, keep_predictions=True
    )
    for (method, dim, fold), cell_preds in preds.items():
        cell = next(
            c for c in report.cells if (c.method, c.dim, c.fold) == (method, dim, fold)
        )
        assert cell.fallback_rate == pytest.approx(
            sum(p.fallback for p in cell_preds) / len(cell_preds)
        )


def test_grid_parallel_workers_match_serial():
    ratings, space = preference_corpus(5, n_users=40, n_items=20, density=0.3)
    mf = TrainingConfig(latent_dim=3, max_epochs=15)
    methods = [
        MethodSpec("plain-mf", mf_config=mf, coupling=CouplingConfig(neighborhood_size=3)),
        MethodSpec("cimf", mf_config=mf, coupling=CouplingConfig(neighborhood_size=3)),
    ]
    serial, _ = evaluate_grid(ratings, space, methods, dims=[3], folds=2, seed=4, workers=1)
    parallel, _ = evaluate_grid(ratings, space, methods, dims=[3], folds=2, seed=4, workers=2)
    assert serial.to_csv() == parallel.to_csv()


def test_grid_rejects_duplicate_method_kinds(demo):
    ratings, space = demo
    methods = grid_methods() + [MethodSpec("cimf", coupling=CouplingConfig(neighborhood_size=2))]
    with pytest.raises(ValueError, match="unique"):
        evaluate_grid(ratings, space, methods, dims=[2], folds=2, seed=0)


def test_grid_mean_and_improvement(demo):
    ratings, space = demo
    report, _ = evaluate_grid(ratings, space, grid_methods(), dims=[2], folds=2, seed=0)
    mean_rmse = report.mean("cimf", 2, "rmse")
    per_fold = [c.rmse for c in report.cells if c.method == "cimf"]
    assert mean_rmse == pytest.approx(np.mean(per_fold))
    with pytest.raises(ValueError):
        report.mean("jsmf", 2, "rmse")
