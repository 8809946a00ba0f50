"""Sparse (user, item, rating) triples with label interning.

User and item labels are interned to dense integer ids in first-appearance
order, so reloading the same source yields identical ids. At most one rating
survives per (user, item) pair: the last one wins and the dataset remembers
how many duplicates were collapsed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class RatingDataset:
    """Immutable rating triples over interned user/item ids.

    ``item_labels`` may contain items that never occur in the triples (items
    known from a catalog but unrated); factor models still cover them.
    """

    user_labels: list[str]
    item_labels: list[str]
    user_ids: np.ndarray
    item_ids: np.ndarray
    values: np.ndarray
    rating_min: float
    rating_max: float
    duplicate_count: int = 0

    _user_index: dict[str, int] = field(init=False, repr=False)
    _item_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._user_index = {label: i for i, label in enumerate(self.user_labels)}
        self._item_index = {label: i for i, label in enumerate(self.item_labels)}

    @property
    def n_users(self) -> int:
        return len(self.user_labels)

    @property
    def n_items(self) -> int:
        return len(self.item_labels)

    @property
    def n_ratings(self) -> int:
        return len(self.values)

    def user_id(self, label: str) -> int | None:
        return self._user_index.get(label)

    def item_id(self, label: str) -> int | None:
        return self._item_index.get(label)

    def global_mean(self) -> float:
        if self.n_ratings == 0:
            raise ValueError("empty rating dataset has no mean")
        return float(self.values.mean())

    def rated_user_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_users, dtype=bool)
        mask[self.user_ids] = True
        return mask

    def rated_item_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_items, dtype=bool)
        mask[self.item_ids] = True
        return mask

    def subset(self, row_mask: np.ndarray) -> "RatingDataset":
        """New dataset over the selected triple rows, sharing the interning tables."""
        return RatingDataset(
            user_labels=self.user_labels,
            item_labels=self.item_labels,
            user_ids=self.user_ids[row_mask],
            item_ids=self.item_ids[row_mask],
            values=self.values[row_mask],
            rating_min=self.rating_min,
            rating_max=self.rating_max,
            duplicate_count=0,
        )

    def clamp(self, predictions: np.ndarray | float) -> np.ndarray | float:
        """Clip predictions to the declared rating range (evaluation-time only)."""
        return np.clip(predictions, self.rating_min, self.rating_max)


def build_dataset(
    triples: Iterable[tuple[str, str, float]],
    rating_range: tuple[float, float],
    item_labels: list[str] | None = None,
    user_labels: list[str] | None = None,
) -> RatingDataset:
    """Intern raw (user label, item label, rating) triples into a RatingDataset.

    ``item_labels`` / ``user_labels`` pre-seed the id spaces (catalog order);
    labels missing from them are appended in first-rating order. Ratings
    outside the declared range are rejected. Duplicate (user, item) pairs
    keep the last rating, counted and logged.
    """
    lo, hi = float(rating_range[0]), float(rating_range[1])
    if not lo < hi:
        raise ValueError(f"invalid rating range ({lo}, {hi})")
    user_labels = list(user_labels) if user_labels is not None else []
    user_index = {label: i for i, label in enumerate(user_labels)}
    if len(user_index) != len(user_labels):
        raise ValueError("user_labels contains duplicates")
    items = list(item_labels) if item_labels is not None else []
    item_index = {label: i for i, label in enumerate(items)}
    if len(item_index) != len(items):
        raise ValueError("item_labels contains duplicates")

    order: list[tuple[int, int]] = []
    value_of: dict[tuple[int, int], float] = {}
    duplicates = 0
    for user, item, rating in triples:
        user, item = str(user), str(item)
        rating = float(rating)
        if not lo <= rating <= hi:
            raise ValueError(
                f"rating {rating} for ({user!r}, {item!r}) outside declared range [{lo}, {hi}]"
            )
        u = user_index.get(user)
        if u is None:
            u = len(user_labels)
            user_index[user] = u
            user_labels.append(user)
        i = item_index.get(item)
        if i is None:
            i = len(items)
            item_index[item] = i
            items.append(item)
        key = (u, i)
        if key in value_of:
            duplicates += 1
        else:
            order.append(key)
        value_of[key] = rating

    if duplicates:
        logger.info("collapsed %d duplicate (user, item) ratings (last wins)", duplicates)

    user_ids = np.fromiter((u for u, _ in order), dtype=np.int64, count=len(order))
    item_ids = np.fromiter((i for _, i in order), dtype=np.int64, count=len(order))
    values = np.fromiter((value_of[key] for key in order), dtype=np.float64, count=len(order))
    return RatingDataset(
        user_labels=user_labels,
        item_labels=items,
        user_ids=user_ids,
        item_ids=item_ids,
        values=values,
        rating_min=lo,
        rating_max=hi,
        duplicate_count=duplicates,
    )
