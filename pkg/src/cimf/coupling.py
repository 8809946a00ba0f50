"""Item similarity from coupled categorical attributes.

The coupled measure scores two values of one attribute along two axes and
multiplies them:

* intra-attribute (:func:`iaavs`): values that occur with similar frequency
  are similar -- |g(x)|*|g(y)| / (|g(x)| + |g(y)| + |g(x)|*|g(y)|);
* inter-attribute (:func:`ieavs`): values whose item sets co-occur with the
  same values of the *other* attributes are similar -- a convex combination,
  over the other attributes, of overlaps between conditional distributions
  (:func:`irs`).

Their product (:func:`cavs`) is summed across attributes to give the item
similarity :func:`cis`, which is >= 0 and bounded by the attribute count.
Self-similarity is deliberately not 1: a value shared by many items scores
higher against itself than a rare one.

Also here: the plain one-hot attribute-vector measures (pearson / cosine /
jaccard) used by the hybrid baselines, item-item pearson over co-ratings,
and top-K neighborhood construction with a reproducible dump format.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse

from .attributes import AttributeSpace
from .ratings import RatingDataset

logger = logging.getLogger(__name__)

SIMILARITY_KINDS = ("coupled", "pearson", "cosine", "jaccard", "rating-pearson")


@dataclass(frozen=True)
class CouplingConfig:
    """Knobs for coupled similarity and neighborhood construction.

    Attributes:
        neighborhood_size: K, how many most-similar items regularize each item.
        gamma: base per-attribute weights for the inter-attribute combination;
            None means uniform. For each excluded attribute j the remaining
            weights are renormalized to unit sum.
        normalize: renormalize each item's neighbor weights to unit sum.
            Raw coupled similarities sum up to K * J and would otherwise force
            shrinkage of the regularized factors; the raw mode stays available
            for fidelity experiments.
    """

    neighborhood_size: int = 10
    gamma: tuple[float, ...] | None = None
    normalize: bool = True

    def __post_init__(self):
        if self.neighborhood_size < 1:
            raise ValueError("neighborhood_size must be >= 1")
        if self.gamma is not None:
            g = np.asarray(self.gamma, dtype=np.float64)
            if g.ndim != 1 or len(g) == 0:
                raise ValueError("gamma must be a non-empty 1-d weight vector")
            if np.any(g < 0) or np.any(g > 1):
                raise ValueError("gamma entries must lie in [0, 1]")

    def weights_excluding(self, j: int, n_attributes: int) -> np.ndarray:
        """Unit-sum weights over attributes k != j (position j is 0)."""
        if self.gamma is None:
            g = np.ones(n_attributes, dtype=np.float64)
        else:
            if len(self.gamma) != n_attributes:
                raise ValueError(
                    f"gamma has {len(self.gamma)} weights, space has {n_attributes} attributes"
                )
            g = np.asarray(self.gamma, dtype=np.float64).copy()
        g[j] = 0.0
        total = g.sum()
        if n_attributes > 1 and total <= 0.0:
            raise ValueError(f"gamma weights vanish once attribute {j} is excluded")
        return g / total if total > 0 else g


# ---------------------------------------------------------------------------
# value-level measures
# ---------------------------------------------------------------------------

def iaavs(space: AttributeSpace, j: int, x: int, y: int) -> float:
    """Intra-attribute value similarity from occurrence frequencies; in (0, 1)."""
    fx = space.value_frequency(j, x)
    fy = space.value_frequency(j, y)
    if y < x:
        fx, fy = fy, fx
    prod = fx * fy
    return prod / (fx + fy + prod)


def irs(space: AttributeSpace, j: int, k: int, x: int, y: int) -> float:
    """Overlap of the conditional distributions of attribute k given j=x vs j=y.

    Sum over values w of k of min(P(w | j=x), P(w | j=y)). Values that do not
    co-occur with both x and y contribute 0, so only the common support is
    visited. Equals 1 when x == y, 0 when the supports are disjoint.
    """
    if j == k:
        raise ValueError("inter-attribute similarity requires two distinct attributes")
    dist_x = space.cond_dist(j, x, k)
    dist_y = space.cond_dist(j, y, k) if y != x else dist_x
    total = 0.0
    for w in sorted(dist_x.keys() & dist_y.keys()):
        total += min(dist_x[w], dist_y[w])
    return total


def ieavs(space: AttributeSpace, config: CouplingConfig, j: int, x: int, y: int) -> float:
    """Weighted combination of :func:`irs` over every other attribute; in [0, 1].

    With a single-attribute space the combination is empty and defined as 1,
    so the coupled measure degenerates to the intra-attribute one.
    """
    n_attrs = space.n_attributes
    if n_attrs == 1:
        return 1.0
    weights = config.weights_excluding(j, n_attrs)
    total = 0.0
    for k in range(n_attrs):
        if k == j or weights[k] == 0.0:
            continue
        total += weights[k] * irs(space, j, k, x, y)
    return total


def cavs(space: AttributeSpace, config: CouplingConfig, j: int, x: int, y: int) -> float:
    """Coupled value similarity: product of the intra and inter measures."""
    return iaavs(space, j, x, y) * ieavs(space, config, j, x, y)


def cis(space: AttributeSpace, config: CouplingConfig, item_a: int, item_b: int) -> float:
    """Coupled item similarity: per-attribute :func:`cavs` summed over attributes.

    Nonnegative, at most the number of attributes.
    """
    row_a = space.item_values(item_a)
    row_b = space.item_values(item_b)
    total = 0.0
    for j in range(space.n_attributes):
        total += cavs(space, config, j, int(row_a[j]), int(row_b[j]))
    return total


# ---------------------------------------------------------------------------
# one-hot attribute-vector measures (hybrid baselines)
# ---------------------------------------------------------------------------

def attribute_vector_similarity(
    space: AttributeSpace, item_a: int, item_b: int, measure: str
) -> float:
    """Pearson / cosine / jaccard over one-hot encodings of the items' values.

    Items are encoded as 0/1 vectors over all (attribute, value) slots, so
    each vector has exactly one 1 per attribute. Pearson is clamped to
    [0, 1] (a negative correlation would invert the attraction semantics of
    the neighborhood regularizer) and defined as 0 for zero-variance vectors.
    """
    row_a = space.item_values(item_a)
    row_b = space.item_values(item_b)
    n_attrs = space.n_attributes
    shared = int(np.count_nonzero(row_a == row_b))
    if measure == "cosine":
        return shared / n_attrs if n_attrs else 0.0
    if measure == "jaccard":
        union = 2 * n_attrs - shared
        return shared / union if union else 0.0
    if measure == "pearson":
        dim = sum(space.n_values(j) for j in range(n_attrs))
        denom = n_attrs * dim - n_attrs * n_attrs
        if denom <= 0:
            return 0.0
        r = (shared * dim - n_attrs * n_attrs) / denom
        return min(max(r, 0.0), 1.0)
    raise ValueError(f"unknown attribute-vector measure: {measure!r}")


# ---------------------------------------------------------------------------
# neighborhoods
# ---------------------------------------------------------------------------

@dataclass
class SimilarityModel:
    """Per-item top-K neighborhoods under one similarity kind.

    ``neighbors[i]`` holds (item id, weight) pairs sorted by weight descending
    (ties by ascending id) and never contains item i itself. ``raw`` is the
    on-demand pairwise evaluator used during the build; models reconstructed
    from a dump carry ``raw=None``.
    """

    kind: str
    neighbors: list[list[tuple[int, float]]]
    raw: Callable[[int, int], float] | None = field(default=None, repr=False, compare=False)

    @property
    def n_items(self) -> int:
        return len(self.neighbors)

    def matrix(self) -> sparse.csr_matrix:
        """Neighbor weights as a sparse (m, m) matrix, row i = neighborhood of item i."""
        m = self.n_items
        rows, cols, vals = [], [], []
        for i, entries in enumerate(self.neighbors):
            for j, w in entries:
                rows.append(i)
                cols.append(j)
                vals.append(w)
        return sparse.csr_matrix(
            (vals, (rows, cols)), shape=(m, m), dtype=np.float64
        )

    def fingerprint(self) -> str:
        """Stable content hash, recorded in checkpoints for reproducibility."""
        h = hashlib.sha256()
        h.update(self.kind.encode())
        for i, entries in enumerate(self.neighbors):
            for j, w in entries:
                h.update(f"{i}\t{j}\t{w:.12g}\n".encode())
        return h.hexdigest()

    def __getstate__(self):
        state = self.__dict__.copy()
        state["raw"] = None  # evaluator closures do not survive pickling
        return state


def _rating_pearson_evaluator(ratings: RatingDataset) -> Callable[[int, int], float]:
    """Item-item pearson over co-rating user vectors, clamped to [0, 1].

    Pairs with fewer than 2 co-raters, or zero variance on the overlap, get 0.
    """
    by_item: list[dict[int, float]] = [dict() for _ in range(ratings.n_items)]
    for u, i, r in zip(
        ratings.user_ids.tolist(), ratings.item_ids.tolist(), ratings.values.tolist()
    ):
        by_item[i][u] = r

    def evaluate(a: int, b: int) -> float:
        va, vb = by_item[a], by_item[b]
        if len(vb) < len(va):
            va, vb = vb, va
        common = [u for u in va if u in vb]
        if len(common) < 2:
            return 0.0
        xs = np.array([va[u] for u in common])
        ys = np.array([vb[u] for u in common])
        xs = xs - xs.mean()
        ys = ys - ys.mean()
        denom = np.sqrt((xs * xs).sum() * (ys * ys).sum())
        if denom == 0.0:
            return 0.0
        return float(min(max((xs * ys).sum() / denom, 0.0), 1.0))

    return evaluate


class _CoupledEvaluator:
    """Memoizing coupled-similarity evaluator over one space and config."""

    def __init__(self, space: AttributeSpace, config: CouplingConfig):
        self.space = space
        self.config = config
        self._cavs_memo: list[dict[tuple[int, int], float]] = [
            dict() for _ in range(space.n_attributes)
        ]

    def __call__(self, a: int, b: int) -> float:
        space = self.space
        row_a = space.item_values(a)
        row_b = space.item_values(b)
        total = 0.0
        for j in range(space.n_attributes):
            x, y = int(row_a[j]), int(row_b[j])
            if y < x:
                x, y = y, x
            memo = self._cavs_memo[j]
            value = memo.get((x, y))
            if value is None:
                value = cavs(space, self.config, j, x, y)
                memo[(x, y)] = value
            total += value
        return total


#: Above this per-attribute value cardinality the dense value-pair matrices
#: are not materialized and neighborhood builds fall back to pairwise calls.
MAX_DENSE_VALUES = 1024


def _dense_cavs_matrices(space: AttributeSpace, config: CouplingConfig) -> list[np.ndarray] | None:
    """Per-attribute matrices M_j with M_j[x, y] = cavs(j, x, y), or None.

    Same arithmetic as the scalar path, batched: the intra matrix comes from
    the frequency vector, the inter matrix sums min-overlaps of the dense
    conditional tables. Skipped when any attribute's cardinality would make
    the tables unreasonably large.
    """
    n_attrs = space.n_attributes
    sizes = [space.n_values(j) for j in range(n_attrs)]
    if any(size > MAX_DENSE_VALUES for size in sizes):
        return None

    freq = [
        np.array([space.value_frequency(j, x) for x in range(sizes[j])], dtype=np.float64)
        for j in range(n_attrs)
    ]
    # conditional tables C[j][k][x, w] = P(attr k = w | attr j = x)
    cond: dict[tuple[int, int], np.ndarray] = {}
    for j in range(n_attrs):
        for k in range(n_attrs):
            if j == k:
                continue
            counts = np.zeros((sizes[j], sizes[k]), dtype=np.float64)
            np.add.at(counts, (space.assignment[:, j], space.assignment[:, k]), 1.0)
            cond[(j, k)] = counts / freq[j][:, None]

    matrices = []
    for j in range(n_attrs):
        outer = np.outer(freq[j], freq[j])
        intra = outer / (freq[j][:, None] + freq[j][None, :] + outer)
        if n_attrs == 1:
            matrices.append(intra)
            continue
        gamma = config.weights_excluding(j, n_attrs)
        inter = np.zeros((sizes[j], sizes[j]), dtype=np.float64)
        for k in range(n_attrs):
            if k == j or gamma[k] == 0.0:
                continue
            table = cond[(j, k)]
            overlap = np.empty((sizes[j], sizes[j]), dtype=np.float64)
            for x in range(sizes[j]):
                overlap[x] = np.minimum(table[x][None, :], table).sum(axis=1)
            inter += gamma[k] * overlap
        matrices.append(intra * inter)
    return matrices


def build_neighborhoods(
    space: AttributeSpace,
    config: CouplingConfig,
    kind: str = "coupled",
    ratings: RatingDataset | None = None,
) -> SimilarityModel:
    """Rank, per item, the K most similar other items under the chosen measure.

    Ties break by ascending item id, so two builds over the same inputs are
    identical. With ``config.normalize`` each neighborhood's weights are
    rescaled to unit sum (neighborhoods whose weights are all zero are left
    as-is; they contribute nothing to the regularizer either way).

    ``kind="rating-pearson"`` ranks by item-item pearson over co-ratings and
    requires ``ratings``; all other kinds use only the attribute space.
    """
    m = space.n_items
    if m < 2:
        raise ValueError("neighborhood construction needs at least 2 items")
    k = config.neighborhood_size
    if k >= m:
        raise ValueError(
            f"neighborhood size {k} must be below the item count {m}; lower K"
        )

    weight_row: Callable[[int], np.ndarray] | None = None
    if kind == "coupled":
        evaluate: Callable[[int, int], float] = _CoupledEvaluator(space, config)
        matrices = _dense_cavs_matrices(space, config)
        if matrices is not None:
            columns = [space.assignment[:, j] for j in range(space.n_attributes)]

            def weight_row(i):
                row = np.zeros(m, dtype=np.float64)
                values = space.item_values(i)
                for j, M in enumerate(matrices):
                    row += M[int(values[j])][columns[j]]
                return row

    elif kind in ("pearson", "cosine", "jaccard"):
        evaluate = lambda a, b: attribute_vector_similarity(space, a, b, kind)  # noqa: E731
        n_attrs = space.n_attributes
        dim = sum(space.n_values(j) for j in range(n_attrs))

        def weight_row(i):
            shared = np.count_nonzero(
                space.assignment == space.assignment[i][None, :], axis=1
            ).astype(np.float64)
            if kind == "cosine":
                return shared / n_attrs if n_attrs else np.zeros(m)
            if kind == "jaccard":
                return shared / (2 * n_attrs - shared)
            denom = n_attrs * dim - n_attrs * n_attrs
            if denom <= 0:
                return np.zeros(m)
            return np.clip((shared * dim - n_attrs * n_attrs) / denom, 0.0, 1.0)

    elif kind == "rating-pearson":
        if ratings is None:
            raise ValueError("kind='rating-pearson' needs a rating dataset")
        if ratings.n_items != m:
            raise ValueError("rating dataset and attribute space disagree on item count")
        evaluate = _rating_pearson_evaluator(ratings)
    else:
        raise ValueError(f"unknown similarity kind: {kind!r}")

    neighbors: list[list[tuple[int, float]]] = []
    candidate_ids = np.arange(m)
    for i in range(m):
        others = np.concatenate([candidate_ids[:i], candidate_ids[i + 1 :]])
        if weight_row is not None:
            full = weight_row(i)
            weights = full[others]
        else:
            weights = np.empty(m - 1, dtype=np.float64)
            for pos, j in enumerate(others.tolist()):
                weights[pos] = evaluate(i, j)
        order = np.lexsort((others, -weights))[:k]
        chosen = [(int(others[p]), float(weights[p])) for p in order]
        if config.normalize:
            total = sum(w for _, w in chosen)
            if total > 0.0:
                chosen = [(j, w / total) for j, w in chosen]
        neighbors.append(chosen)

    logger.debug("built %s neighborhoods for %d items (K=%d)", kind, m, k)
    return SimilarityModel(kind=kind, neighbors=neighbors, raw=evaluate)


# ---------------------------------------------------------------------------
# dump / load
# ---------------------------------------------------------------------------

def dump_neighborhoods(model: SimilarityModel, item_labels: list[str], path: str) -> None:
    """Write 'item<TAB>neighbor<TAB>weight' lines, weights at 12 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for i, entries in enumerate(model.neighbors):
            for j, w in entries:
                handle.write(f"{item_labels[i]}\t{item_labels[j]}\t{w:.12g}\n")


def load_neighborhoods(
    path: str, item_labels: list[str], kind: str = "coupled"
) -> SimilarityModel:
    """Rebuild a SimilarityModel from a dump written by :func:`dump_neighborhoods`."""
    index = {label: i for i, label in enumerate(item_labels)}
    neighbors: list[list[tuple[int, float]]] = [[] for _ in item_labels]
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            item, neighbor, weight = parts
            if item not in index or neighbor not in index:
                raise ValueError(f"{path}:{lineno}: unknown item label")
            neighbors[index[item]].append((index[neighbor], float(weight)))
    return SimilarityModel(kind=kind, neighbors=neighbors, raw=None)
