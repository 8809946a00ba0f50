"""K-fold cross-validation over the method x dimension grid, RMSE/MAE reports.

Folds partition rating *records* (not users): a seeded shuffle dealt
round-robin, so fold sizes differ by at most one and the same seed always
yields the same split. Test pairs whose user or item is unseen in the
training folds are scored by their method's cold fallback and counted in the
fallback rate rather than dropped -- cold behavior is exactly what the
coupled regularizer exists for, so hiding it would be misleading.

Improvement numbers are metric differences in points times 100 (reference
minus candidate), not relative percentages: 1.1787 vs 0.9002 reads as 27.85.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .attributes import AttributeSpace
from .baselines import MF_SIMILARITY_KIND, MethodSpec, Prediction, run_method
from .coupling import SimilarityModel, build_neighborhoods
from .ratings import RatingDataset
from .util import derive_seed

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Record-level fold assignment: ``assignments[r]`` is record r's fold."""

    k: int
    seed: int
    assignments: np.ndarray

    def train_test(self, ratings: RatingDataset, fold: int) -> tuple[RatingDataset, RatingDataset]:
        if not 0 <= fold < self.k:
            raise ValueError(f"fold {fold} out of range [0, {self.k})")
        test_mask = self.assignments == fold
        return ratings.subset(~test_mask), ratings.subset(test_mask)


def make_folds(ratings: RatingDataset, k: int, seed: int) -> FoldPlan:
    """Seeded balanced partition of the rating records into k folds."""
    n = ratings.n_ratings
    if k < 2:
        raise ValueError("fold count must be >= 2")
    if k > n:
        raise ValueError(f"fold count {k} exceeds the {n} rating records")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=np.int64)
    assignments[rng.permutation(n)] = np.arange(n) % k
    return FoldPlan(k=k, seed=seed, assignments=assignments)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def rmse(pairs) -> float:
    """Root mean squared error over (actual, predicted) pairs."""
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("rmse of an empty pair list")
    diff = arr[:, 0] - arr[:, 1]
    return float(np.sqrt(np.mean(diff * diff)))


def mae(pairs) -> float:
    """Mean absolute error over (actual, predicted) pairs."""
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("mae of an empty pair list")
    return float(np.mean(np.abs(arr[:, 0] - arr[:, 1])))


def improvement(reference: float, candidate: float) -> float:
    """Metric difference in points x 100 (positive = candidate is better)."""
    return (reference - candidate) * 100.0


# ---------------------------------------------------------------------------
# grid evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    """Metrics of one (method, dimension, fold) run. ``dim`` is 0 for CF kinds."""

    method: str
    dim: int
    fold: int
    rmse: float
    mae: float
    fallback_rate: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class EvalReport:
    """All grid cells plus the reference method used for improvement columns."""

    cells: list[CellResult]
    reference_method: str

    def mean(self, method: str, dim: int, metric: str) -> float:
        values = [
            getattr(c, metric)
            for c in self.cells
            if c.method == method and c.dim == dim and not c.failed
        ]
        if not values:
            raise ValueError(f"no successful cells for ({method}, {dim})")
        return float(np.mean(values))

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["method", "dim", "fold", "rmse", "mae", "fallback_rate"])
        for c in sorted(self.cells, key=lambda c: (c.method, c.dim, c.fold)):
            if c.failed:
                writer.writerow([c.method, c.dim, c.fold, "nan", "nan", "nan"])
            else:
                writer.writerow(
                    [c.method, c.dim, c.fold, f"{c.rmse:.6f}", f"{c.mae:.6f}", f"{c.fallback_rate:.6f}"]
                )
        return out.getvalue()

    def to_table(self) -> str:
        """Aligned text table: per (dim, metric) row, one column per method.

        Non-reference methods carry '(improve)' vs the reference method's mean.
        """
        methods = sorted({c.method for c in self.cells})
        if self.reference_method in methods:
            methods.remove(self.reference_method)
            methods.insert(0, self.reference_method)
        dims = sorted({c.dim for c in self.cells})
        header = ["dim", "metric"] + [
            m if m == self.reference_method else f"{m} (improve)" for m in methods
        ]
        rows = [header]
        for dim in dims:
            for metric in ("rmse", "mae"):
                row = [str(dim) if dim else "-", metric.upper()]
                try:
                    ref = self.mean(self.reference_method, dim, metric)
                except ValueError:
                    ref = None
                for m in methods:
                    try:
                        value = self.mean(m, dim, metric)
                    except ValueError:
                        row.append("failed")
                        continue
                    if m == self.reference_method or ref is None:
                        row.append(f"{value:.4f}")
                    else:
                        row.append(f"{value:.4f} ({improvement(ref, value):.2f}%)")
                rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        lines = ["  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)) for row in rows]
        return "\n".join(lines) + "\n"


def fallback_rate(predictions: list[Prediction]) -> float:
    if not predictions:
        return 0.0
    return sum(p.fallback for p in predictions) / len(predictions)


def evaluate_grid(
    ratings: RatingDataset,
    space: AttributeSpace | None,
    methods: list[MethodSpec],
    dims: list[int],
    folds: int,
    seed: int,
    reference_method: str | None = None,
    workers: int = 1,
    keep_predictions: bool = False,
) -> tuple[EvalReport, dict[tuple[str, int, int], list[Prediction]]]:
    """Run every (method, dim, fold) cell of the comparison grid.

    MF-family methods sweep the dimension list; CF methods ignore it and run
    once per fold with dim recorded as 0. Attribute-based neighborhoods are
    fold-independent, so they are built once per similarity kind and shared.
    Each cell's factor initialization derives its own seed from the run seed,
    the method name, the dimension, and the fold, so partial reruns reproduce.
    Failed cells are recorded with the error message instead of aborting the
    grid.
    """
    kinds = [m.kind for m in methods]
    if len(set(kinds)) != len(kinds):
        raise ValueError("method kinds must be unique within one grid")
    plan = make_folds(ratings, folds, derive_seed(seed, "folds"))
    splits = [plan.train_test(ratings, f) for f in range(folds)]

    shared_sims: dict[tuple, SimilarityModel] = {}
    for spec in methods:
        kind = MF_SIMILARITY_KIND.get(spec.kind)
        if kind and spec.mf_config.alpha > 0.0 and (kind, spec.coupling) not in shared_sims:
            if space is None:
                raise ValueError(f"{spec.kind} needs an attribute space")
            shared_sims[(kind, spec.coupling)] = build_neighborhoods(space, spec.coupling, kind)

    tasks = []
    for spec in methods:
        cell_dims = dims if spec.kind in MF_SIMILARITY_KIND or spec.kind == "plain-mf" else [0]
        for dim in cell_dims:
            for fold in range(folds):
                if spec.kind in ("ubcf", "ibcf"):
                    cell_spec = spec
                else:
                    cell_seed = derive_seed(seed, spec.kind, str(dim), str(fold)) % (2**32)
                    cell_spec = replace(
                        spec,
                        mf_config=replace(spec.mf_config, latent_dim=dim, seed=cell_seed),
                    )
                sim = shared_sims.get((MF_SIMILARITY_KIND.get(spec.kind, ""), spec.coupling))
                tasks.append((cell_spec, dim, fold, sim))

    cells: list[CellResult] = []
    predictions: dict[tuple[str, int, int], list[Prediction]] = {}

    def finish(task, result_or_error):
        spec, dim, fold, _ = task
        if isinstance(result_or_error, Exception):
            logger.error("cell (%s, %d, %d) failed: %s", spec.kind, dim, fold, result_or_error)
            cells.append(
                CellResult(spec.kind, dim, fold, float("nan"), float("nan"), float("nan"),
                           error=str(result_or_error))
            )
        else:
            preds, cell = result_or_error
            cells.append(cell)
            if keep_predictions:
                predictions[(spec.kind, dim, fold)] = preds

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_cell_worker, task, splits[task[2]], space) for task in tasks
            ]
            for task, future in zip(tasks, futures):
                try:
                    finish(task, future.result())
                except Exception as exc:  # noqa: BLE001 - cell isolation is the point
                    finish(task, exc)
    else:
        for task in tasks:
            train_set, test_set = splits[task[2]]
            try:
                finish(task, _cell_worker(task, (train_set, test_set), space))
            except Exception as exc:  # noqa: BLE001
                finish(task, exc)

    if reference_method is None:
        kinds = [m.kind for m in methods]
        reference_method = "plain-mf" if "plain-mf" in kinds else kinds[0]
    report = EvalReport(cells=cells, reference_method=reference_method)
    return report, predictions


def _cell_worker(task, split, space):
    spec, dim, fold, sim = task
    train_set, test_set = split
    preds = run_method(spec, train_set, space, test_set, sim=sim)
    pairs = [(p.actual, p.predicted) for p in preds]
    cell = CellResult(
        method=spec.kind,
        dim=dim,
        fold=fold,
        rmse=rmse(pairs),
        mae=mae(pairs),
        fallback_rate=fallback_rate(preds),
    )
    return preds, cell
