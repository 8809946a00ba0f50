"""Latent-factor rating model with a coupled-neighborhood regularizer.

The model predicts ``r_m + P[u] . Q[i]`` (global offset plus factor product).
Training minimizes, by full-batch gradient descent, the three-term loss

    1/2 sum_{rated (u,i)} (R[u,i] - r_m - P[u].Q[i])^2
  + lambda/2 (|P|_F^2 + |Q|_F^2)
  + alpha/2 sum_i | Q[i] - sum_{j in N(i)} w_ij Q[j] |^2

where N(i) is item i's similarity neighborhood. The third term pulls each
item's factors toward the weighted combination of its neighbors', which is
what lets items with few ratings borrow strength from attribute-similar ones.
Gradients are exact full sums (including the reverse-neighborhood term for
items appearing in other items' neighborhoods), not stochastic estimates, so
they can be validated against finite differences of the loss.

With ``alpha = 0`` the coupling term vanishes and training is exactly plain
regularized matrix factorization; the trainer takes the identical code path
so the reduction holds bitwise.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from .coupling import SimilarityModel
from .ratings import RatingDataset

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Raised when the objective grows persistently or turns non-finite."""


@dataclass(frozen=True)
class TrainingConfig:
    """Trainer hyperparameters. Defaults are this package's own, documented as such."""

    latent_dim: int = 10
    learning_rate: float = 0.005
    reg_lambda: float = 0.05
    alpha: float = 0.1
    max_epochs: int = 200
    convergence_tol: float = 1e-5
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.reg_lambda < 0 or self.alpha < 0:
            raise ValueError("reg_lambda and alpha must be >= 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")


@dataclass
class FactorModel:
    """User factors P (n x d), item factors Q (m x d), global offset r_m.

    ``seen_users`` / ``seen_items`` mark ids that had at least one training
    rating; predictions for unseen ids fall back to the offset.
    """

    P: np.ndarray
    Q: np.ndarray
    r_m: float
    seen_users: np.ndarray = field(default=None)  # type: ignore[assignment]
    seen_items: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.seen_users is None:
            self.seen_users = np.ones(self.P.shape[0], dtype=bool)
        if self.seen_items is None:
            self.seen_items = np.ones(self.Q.shape[0], dtype=bool)

    @property
    def n_users(self) -> int:
        return self.P.shape[0]

    @property
    def n_items(self) -> int:
        return self.Q.shape[0]

    @property
    def dim(self) -> int:
        return self.P.shape[1]


def predict(model: FactorModel, u: int, i: int) -> tuple[float, bool]:
    """Predict one rating; returns (estimate, fallback flag).

    Ids out of range or without any training rating get the cold fallback:
    the global offset, flagged. No clamping here; clamping to the rating
    range happens at evaluation time only.
    """
    user_ok = 0 <= u < model.n_users and bool(model.seen_users[u])
    item_ok = 0 <= i < model.n_items and bool(model.seen_items[i])
    if not (user_ok and item_ok):
        return model.r_m, True
    return float(model.r_m + model.P[u] @ model.Q[i]), False


def _check_dims(model: FactorModel, ratings: RatingDataset) -> None:
    if ratings.n_users != model.n_users or ratings.n_items != model.n_items:
        raise ValueError(
            f"model is {model.n_users} users x {model.n_items} items, dataset is "
            f"{ratings.n_users} x {ratings.n_items}"
        )


def _neighbor_matrix(model: FactorModel, sim: SimilarityModel) -> sparse.csr_matrix:
    W = sim.matrix()
    if W.shape[0] != model.n_items:
        raise ValueError(
            f"similarity model covers {W.shape[0]} items, factor model {model.n_items}"
        )
    return W


def objective(
    model: FactorModel,
    ratings: RatingDataset,
    sim: SimilarityModel | None,
    config: TrainingConfig,
) -> float:
    """Exact three-term loss: squared error, factor regularizer, coupling penalty.

    Items with an empty neighborhood contribute alpha/2 |Q_i|^2 to the third
    term (their neighborhood combination is the zero vector).
    """
    _check_dims(model, ratings)
    err = (
        model.r_m
        + np.einsum("ij,ij->i", model.P[ratings.user_ids], model.Q[ratings.item_ids])
        - ratings.values
    )
    loss = 0.5 * float(err @ err)
    loss += 0.5 * config.reg_lambda * (float(np.sum(model.P**2)) + float(np.sum(model.Q**2)))
    if config.alpha > 0.0:
        if sim is None:
            raise ValueError("coupling weight alpha > 0 requires a similarity model")
        W = _neighbor_matrix(model, sim)
        C = model.Q - W @ model.Q
        loss += 0.5 * config.alpha * float(np.sum(C**2))
    return loss


def gradients(
    model: FactorModel,
    ratings: RatingDataset,
    sim: SimilarityModel | None,
    config: TrainingConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-batch gradients of :func:`objective` w.r.t. P and Q.

    The item gradient carries three coupling pieces where C = Q - W Q:
    rating residuals, alpha * C_i, and the reverse-neighborhood pull
    -alpha * sum_{j : i in N(j)} w_ji C_j, i.e. -alpha * (W^T C)_i.
    """
    _check_dims(model, ratings)
    err = (
        model.r_m
        + np.einsum("ij,ij->i", model.P[ratings.user_ids], model.Q[ratings.item_ids])
        - ratings.values
    )
    E = sparse.csr_matrix(
        (err, (ratings.user_ids, ratings.item_ids)),
        shape=(model.n_users, model.n_items),
    )
    grad_P = E @ model.Q + config.reg_lambda * model.P
    grad_Q = E.T @ model.P + config.reg_lambda * model.Q
    if config.alpha > 0.0:
        if sim is None:
            raise ValueError("coupling weight alpha > 0 requires a similarity model")
        W = _neighbor_matrix(model, sim)
        C = model.Q - W @ model.Q
        grad_Q += config.alpha * (C - W.T @ C)
    return grad_P, grad_Q


def grad_user(
    model: FactorModel, ratings: RatingDataset, config: TrainingConfig, u: int
) -> np.ndarray:
    """Loss gradient w.r.t. one user's factor row; lambda * P_u if they rated nothing."""
    _check_dims(model, ratings)
    if not 0 <= u < model.n_users:
        raise ValueError(f"user id {u} out of range")
    mask = ratings.user_ids == u
    items = ratings.item_ids[mask]
    err = model.r_m + model.Q[items] @ model.P[u] - ratings.values[mask]
    return model.Q[items].T @ err + config.reg_lambda * model.P[u]


def grad_item(
    model: FactorModel,
    ratings: RatingDataset,
    sim: SimilarityModel | None,
    config: TrainingConfig,
    i: int,
) -> np.ndarray:
    """Loss gradient w.r.t. one item's factor row, coupling terms included."""
    _check_dims(model, ratings)
    if not 0 <= i < model.n_items:
        raise ValueError(f"item id {i} out of range")
    mask = ratings.item_ids == i
    users = ratings.user_ids[mask]
    err = model.r_m + model.P[users] @ model.Q[i] - ratings.values[mask]
    g = model.P[users].T @ err + config.reg_lambda * model.Q[i]
    if config.alpha > 0.0:
        if sim is None:
            raise ValueError("coupling weight alpha > 0 requires a similarity model")
        W = _neighbor_matrix(model, sim)
        C = model.Q - W @ model.Q
        reverse = W.T @ C
        g = g + config.alpha * (C[i] - reverse[i])
    return g


@dataclass
class TrainResult:
    """Trained model plus the per-epoch objective trace.

    ``trace[0]`` is the loss at initialization; ``trace[e]`` the loss after
    epoch e. ``stop_reason`` is one of {"converged", "max_epochs"}.
    """

    model: FactorModel
    trace: list[float]
    epochs: int
    stop_reason: str


def train(
    ratings: RatingDataset,
    sim: SimilarityModel | None,
    config: TrainingConfig,
) -> TrainResult:
    """Full-batch gradient descent on the three-term loss.

    The offset r_m is the training-rating mean, factors start from seeded
    Gaussian noise, and both factor matrices update simultaneously each epoch.
    Stops on relative objective change below ``convergence_tol`` or after
    ``max_epochs``. Raises :class:`TrainingDiverged` if the objective grows
    five epochs in a row or turns non-finite (lower the learning rate).
    """
    if ratings.n_ratings == 0:
        raise ValueError("cannot train on an empty rating set")
    n, m, d = ratings.n_users, ratings.n_items, config.latent_dim
    if d > min(n, m):
        raise ValueError(f"latent_dim {d} exceeds min(users={n}, items={m})")

    rng = np.random.default_rng(config.seed)
    model = FactorModel(
        P=rng.normal(0.0, config.init_scale, size=(n, d)),
        Q=rng.normal(0.0, config.init_scale, size=(m, d)),
        r_m=ratings.global_mean(),
        seen_users=ratings.rated_user_mask(),
        seen_items=ratings.rated_item_mask(),
    )
    if config.alpha > 0.0 and sim is None:
        raise ValueError("coupling weight alpha > 0 requires a similarity model")

    eta = config.learning_rate
    trace = [objective(model, ratings, sim, config)]
    growth_streak = 0
    stop_reason = "max_epochs"
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        grad_P, grad_Q = gradients(model, ratings, sim, config)
        model.P -= eta * grad_P
        model.Q -= eta * grad_Q
        loss = objective(model, ratings, sim, config)
        if not np.isfinite(loss) or not np.all(np.isfinite(model.Q)) or not np.all(
            np.isfinite(model.P)
        ):
            raise TrainingDiverged(
                f"non-finite objective at epoch {epoch}; lower the learning rate "
                f"(currently {eta})"
            )
        previous = trace[-1]
        trace.append(loss)
        growth_streak = growth_streak + 1 if loss > previous else 0
        if growth_streak >= 5:
            raise TrainingDiverged(
                f"objective grew for 5 consecutive epochs (epoch {epoch}); "
                f"lower the learning rate (currently {eta})"
            )
        rel_change = abs(loss - previous) / max(abs(previous), np.finfo(float).tiny)
        if rel_change < config.convergence_tol:
            stop_reason = "converged"
            break

    logger.debug(
        "training stopped after %d epochs (%s), objective %.6g", epoch, stop_reason, trace[-1]
    )
    return TrainResult(model=model, trace=trace, epochs=epoch, stop_reason=stop_reason)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    """A trained model bundled with everything needed to serve predictions."""

    model: FactorModel
    config: TrainingConfig
    user_labels: list[str]
    item_labels: list[str]
    rating_min: float
    rating_max: float
    similarity_fingerprint: str | None = None

    def predict_label(self, user: str, item: str) -> tuple[float, bool]:
        """Predict for raw labels; unknown labels get the offset fallback, flagged."""
        u = self._user_index.get(user, -1)
        i = self._item_index.get(item, -1)
        return predict(self.model, u, i)

    def __post_init__(self):
        self._user_index = {label: i for i, label in enumerate(self.user_labels)}
        self._item_index = {label: i for i, label in enumerate(self.item_labels)}


def save_checkpoint(path: str, checkpoint: Checkpoint) -> None:
    """Serialize a checkpoint to an .npz archive (factors binary, metadata JSON)."""
    meta = {
        "r_m": checkpoint.model.r_m,
        "config": asdict(checkpoint.config),
        "user_labels": checkpoint.user_labels,
        "item_labels": checkpoint.item_labels,
        "rating_min": checkpoint.rating_min,
        "rating_max": checkpoint.rating_max,
        "similarity_fingerprint": checkpoint.similarity_fingerprint,
    }
    with open(path, "wb") as handle:
        np.savez(
            handle,
            P=checkpoint.model.P,
            Q=checkpoint.model.Q,
            seen_users=checkpoint.model.seen_users,
            seen_items=checkpoint.model.seen_items,
            meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        )


def load_checkpoint(path: str) -> Checkpoint:
    """Inverse of :func:`save_checkpoint`; factors round-trip bit-exactly."""
    with np.load(path) as archive:
        meta = json.loads(archive["meta"].tobytes().decode("utf-8"))
        model = FactorModel(
            P=archive["P"],
            Q=archive["Q"],
            r_m=float(meta["r_m"]),
            seen_users=archive["seen_users"],
            seen_items=archive["seen_items"],
        )
    return Checkpoint(
        model=model,
        config=TrainingConfig(**meta["config"]),
        user_labels=list(meta["user_labels"]),
        item_labels=list(meta["item_labels"]),
        rating_min=float(meta["rating_min"]),
        rating_max=float(meta["rating_max"]),
        similarity_fingerprint=meta.get("similarity_fingerprint"),
    )
