"""Comparison methods sharing one prediction interface.

The matrix-factorization family (``cimf``, ``plain-mf``, and the hybrids
``psmf`` / ``csmf`` / ``jsmf``) all run the same trainer and differ only in
which similarity kind feeds the neighborhood regularizer -- coupled,
attribute pearson, cosine, or jaccard -- or, for plain MF, in having the
coupling weight forced to zero. The neighborhood-free baselines ``ubcf`` and
``ibcf`` are mean-centered pearson-weighted K-NN over co-rating vectors.

PMF and RSVD from the usual comparison tables are both rating-matrix-only
latent-factor methods whose internals are not pinned down here; this package
provides the single honest equivalent ``plain-mf`` rather than claiming
fidelity to either.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .attributes import AttributeSpace
from .coupling import CouplingConfig, SimilarityModel, build_neighborhoods
from .factorization import TrainingConfig, predict, train
from .ratings import RatingDataset

logger = logging.getLogger(__name__)

METHOD_KINDS = ("cimf", "plain-mf", "ubcf", "ibcf", "psmf", "csmf", "jsmf")

#: Similarity kind consumed by each MF-family method.
MF_SIMILARITY_KIND = {
    "cimf": "coupled",
    "psmf": "pearson",
    "csmf": "cosine",
    "jsmf": "jaccard",
}

#: Minimum number of co-ratings before a pearson weight counts.
MIN_OVERLAP = 2


class Prediction(NamedTuple):
    user: int
    item: int
    actual: float
    predicted: float
    fallback: bool


@dataclass(frozen=True)
class MethodSpec:
    """One method to run: its kind plus the knobs that kind consumes."""

    kind: str
    mf_config: TrainingConfig = field(default_factory=TrainingConfig)
    cf_neighbors: int = 20
    coupling: CouplingConfig = field(default_factory=CouplingConfig)

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown method kind: {self.kind!r}")
        if self.cf_neighbors < 1:
            raise ValueError("cf_neighbors must be >= 1")


def run_method(
    spec: MethodSpec,
    train_set: RatingDataset,
    space: AttributeSpace | None,
    test_set: RatingDataset,
    sim: SimilarityModel | None = None,
) -> list[Prediction]:
    """Train/evaluate one method and predict every test pair.

    Predictions are clamped to the declared rating range. Pairs whose user or
    item has no training rating are scored by the method's cold fallback and
    flagged. A prebuilt ``sim`` (matching the method's similarity kind) skips
    the neighborhood construction; ``plain-mf`` ignores similarities entirely.
    """
    if spec.kind in ("ubcf", "ibcf"):
        cf = _CFContext(train_set)
        out = []
        for u, i, actual in zip(
            test_set.user_ids.tolist(), test_set.item_ids.tolist(), test_set.values.tolist()
        ):
            value, fallback = cf.predict(spec.kind, u, i, spec.cf_neighbors)
            out.append(Prediction(u, i, actual, float(train_set.clamp(value)), fallback))
        return out

    if spec.kind == "plain-mf":
        config = _with_alpha(spec.mf_config, 0.0)
        sim = None
    else:
        config = spec.mf_config
        if sim is None and config.alpha > 0.0:
            if space is None:
                raise ValueError(f"{spec.kind} needs an attribute space to build neighborhoods")
            sim = build_neighborhoods(space, spec.coupling, MF_SIMILARITY_KIND[spec.kind])
    result = train(train_set, sim, config)
    out = []
    for u, i, actual in zip(
        test_set.user_ids.tolist(), test_set.item_ids.tolist(), test_set.values.tolist()
    ):
        value, fallback = predict(result.model, u, i)
        out.append(Prediction(u, i, actual, float(train_set.clamp(value)), fallback))
    return out


def _with_alpha(config: TrainingConfig, alpha: float) -> TrainingConfig:
    if config.alpha == alpha:
        return config
    kwargs = {k: getattr(config, k) for k in config.__dataclass_fields__}
    kwargs["alpha"] = alpha
    return TrainingConfig(**kwargs)


def format_predictions(predictions: list[Prediction], train_set: RatingDataset) -> str:
    """Render predictions as 'user<TAB>item<TAB>actual<TAB>predicted<TAB>fallback' lines."""
    lines = []
    for p in predictions:
        lines.append(
            f"{train_set.user_labels[p.user]}\t{train_set.item_labels[p.item]}\t"
            f"{p.actual:.6g}\t{p.predicted:.6f}\t{int(p.fallback)}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# neighborhood collaborative filtering
# ---------------------------------------------------------------------------

def cf_predict(
    kind: str, train_set: RatingDataset, u: int, i: int, k: int
) -> tuple[float, bool]:
    """One K-NN prediction; returns (estimate, fallback flag), unclamped.

    ``ubcf`` aggregates the K most rating-correlated co-raters of the item,
    ``ibcf`` the K most correlated items the user rated:
    mean + sum(w * centered neighbor rating) / sum(|w|). With no qualifying
    neighbor the relevant (user or item) mean is returned; a user or item
    absent from training falls back to the global mean, flagged.
    """
    if kind not in ("ubcf", "ibcf"):
        raise ValueError(f"unknown CF kind: {kind!r}")
    if k < 1:
        raise ValueError("neighbor count must be >= 1")
    return _CFContext(train_set).predict(kind, u, i, k)


class _CFContext:
    """Per-training-set rating vectors, means, and cached pearson weights."""

    def __init__(self, train_set: RatingDataset):
        self.train = train_set
        self.by_user: list[dict[int, float]] = [dict() for _ in range(train_set.n_users)]
        self.by_item: list[dict[int, float]] = [dict() for _ in range(train_set.n_items)]
        for u, i, r in zip(
            train_set.user_ids.tolist(), train_set.item_ids.tolist(), train_set.values.tolist()
        ):
            self.by_user[u][i] = r
            self.by_item[i][u] = r
        self.user_mean = [
            (sum(v.values()) / len(v)) if v else 0.0 for v in self.by_user
        ]
        self.item_mean = [
            (sum(v.values()) / len(v)) if v else 0.0 for v in self.by_item
        ]
        self.global_mean = train_set.global_mean() if train_set.n_ratings else 0.0
        self._pearson_cache: dict[tuple[int, int], float] = {}

    def _pearson(self, vectors: list[dict[int, float]], a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        cached = self._pearson_cache.get(key)
        if cached is not None:
            return cached
        va, vb = vectors[key[0]], vectors[key[1]]
        if len(vb) < len(va):
            va, vb = vb, va
        common = [x for x in va if x in vb]
        if len(common) < MIN_OVERLAP:
            weight = 0.0
        else:
            xs = np.array([va[x] for x in common])
            ys = np.array([vb[x] for x in common])
            xs = xs - xs.mean()
            ys = ys - ys.mean()
            denom = np.sqrt((xs * xs).sum() * (ys * ys).sum())
            weight = float((xs * ys).sum() / denom) if denom > 0.0 else 0.0
        self._pearson_cache[key] = weight
        return weight

    def predict(self, kind: str, u: int, i: int, k: int) -> tuple[float, bool]:
        user_known = 0 <= u < len(self.by_user) and bool(self.by_user[u])
        item_known = 0 <= i < len(self.by_item) and bool(self.by_item[i])
        if not user_known or not item_known:
            return self.global_mean, True

        if kind == "ubcf":
            center, vectors = u, self.by_user
            candidates = [v for v in self.by_item[i] if v != u]
            base = self.user_mean[u]
            neighbor_mean = self.user_mean
            neighbor_rating = lambda v: self.by_user[v][i]  # noqa: E731
        else:
            center, vectors = i, self.by_item
            candidates = [j for j in self.by_user[u] if j != i]
            base = self.item_mean[i]
            neighbor_mean = self.item_mean
            neighbor_rating = lambda j: self.by_item[j][u]  # noqa: E731

        weighted = [(self._pearson(vectors, center, c), c) for c in candidates]
        weighted = [(w, c) for w, c in weighted if w != 0.0]
        if not weighted:
            return base, False
        weighted.sort(key=lambda wc: (-wc[0], wc[1]))
        top = weighted[:k]
        denom = sum(abs(w) for w, _ in top)
        if denom == 0.0:
            return base, False
        numer = sum(w * (neighbor_rating(c) - neighbor_mean[c]) for w, c in top)
        return base + numer / denom, False
