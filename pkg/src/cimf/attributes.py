"""Categorical item attribute space with inverted value indexes.

Items are described by a fixed schema of categorical attributes. This module
interns items, attributes, and per-attribute values into dense integer ids
(first-appearance order, so ids are stable across reloads) and answers the
set-size and co-occurrence queries that every similarity measure consumes:

* ``value_frequency(j, x)``  -- how many items take value x on attribute j,
* ``pair_count(j, k, x, w)`` -- how many items take value x on j AND w on k,
* ``cond_prob(k, j, w, x)``  -- empirical P(attribute k = w | attribute j = x).

The space is immutable after :func:`build_space`; all query methods are
read-only and safe to call concurrently. Pair counts are materialized lazily
per attribute pair because high-cardinality attributes (e.g. book authors)
make eager precomputation wasteful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

#: Canonical label substituted for absent attribute values so that every
#: (item, attribute) pair maps to exactly one value.
MISSING_VALUE = "⟨missing⟩"


def _canonical(value: str | None) -> str:
    if value is None:
        return MISSING_VALUE
    value = str(value)
    return value if value.strip() else MISSING_VALUE


@dataclass
class AttributeSpace:
    """Immutable index of items x categorical attributes.

    Attributes:
        item_labels: original item labels, position = dense item id.
        attribute_names: attribute names, position = dense attribute id.
        value_labels: per attribute, value labels, position = dense value id.
        assignment: (m, J) int array; ``assignment[i, j]`` is the value id
            that item i takes on attribute j.
    """

    item_labels: list[str]
    attribute_names: list[str]
    value_labels: list[list[str]]
    assignment: np.ndarray

    _item_index: dict[str, int] = field(init=False, repr=False)
    _value_index: list[dict[str, int]] = field(init=False, repr=False)
    _inverted: list[list[np.ndarray]] = field(init=False, repr=False)
    _pair_counts: dict[tuple[int, int], dict[tuple[int, int], int]] = field(
        init=False, repr=False
    )
    _dist_cache: dict[tuple[int, int], dict[int, dict[int, float]]] = field(
        init=False, repr=False
    )

    def __post_init__(self):
        self._item_index = {label: i for i, label in enumerate(self.item_labels)}
        self._value_index = [
            {label: x for x, label in enumerate(labels)} for labels in self.value_labels
        ]
        self._inverted = []
        for j in range(self.n_attributes):
            per_value: list[np.ndarray] = []
            column = self.assignment[:, j] if self.n_items else np.empty(0, dtype=np.int64)
            for x in range(len(self.value_labels[j])):
                per_value.append(np.flatnonzero(column == x))
            self._inverted.append(per_value)
        self._pair_counts = {}
        self._dist_cache = {}

    # -- basic shape -------------------------------------------------------

    @property
    def n_items(self) -> int:
        return len(self.item_labels)

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    def n_values(self, j: int) -> int:
        self._check_attribute(j)
        return len(self.value_labels[j])

    # -- id lookups --------------------------------------------------------

    def item_id(self, label: str) -> int:
        try:
            return self._item_index[label]
        except KeyError:
            raise ValueError(f"unknown item label: {label!r}") from None

    def value_id(self, j: int, label: str) -> int:
        self._check_attribute(j)
        try:
            return self._value_index[j][label]
        except KeyError:
            raise ValueError(
                f"attribute {self.attribute_names[j]!r} has no value {label!r}"
            ) from None

    def item_values(self, i: int) -> np.ndarray:
        self._check_item(i)
        return self.assignment[i]

    # -- set / frequency queries --------------------------------------------

    def items_with_value(self, j: int, x: int) -> np.ndarray:
        """Item ids whose attribute j takes value x."""
        self._check_value(j, x)
        return self._inverted[j][x]

    def value_frequency(self, j: int, x: int) -> int:
        """Number of items whose attribute j takes value x (>= 1 for any interned value)."""
        self._check_value(j, x)
        return len(self._inverted[j][x])

    def pair_count(self, j: int, k: int, x: int, w: int) -> int:
        """Number of items with attribute j = x and attribute k = w."""
        self._check_value(j, x)
        self._check_value(k, w)
        if j == k:
            raise ValueError("pair_count requires two distinct attributes")
        key = (j, k) if j < k else (k, j)
        table = self._pair_counts.get(key)
        if table is None:
            table = self._build_pair_table(*key)
            self._pair_counts[key] = table
        pair = (x, w) if j < k else (w, x)
        return table.get(pair, 0)

    def _build_pair_table(self, j: int, k: int) -> dict[tuple[int, int], int]:
        table: dict[tuple[int, int], int] = {}
        for x, w in zip(self.assignment[:, j].tolist(), self.assignment[:, k].tolist()):
            key = (x, w)
            table[key] = table.get(key, 0) + 1
        return table

    def cond_prob(self, k: int, j: int, w: int, x: int) -> float:
        """Empirical probability that attribute k = w among items with attribute j = x.

        For a fixed (j, x) this is a distribution over the values of k:
        summing over all w yields exactly 1.
        """
        if j == k:
            raise ValueError("conditioning an attribute on itself is undefined")
        return self.pair_count(j, k, x, w) / self.value_frequency(j, x)

    def cond_dist(self, j: int, x: int, k: int) -> dict[int, float]:
        """Support-only conditional distribution of attribute k given attribute j = x.

        Returns {value id of k: probability}, omitting zero-probability values.
        All distributions of an attribute pair are derived together from its
        co-occurrence table and cached.
        """
        if j == k:
            raise ValueError("conditioning an attribute on itself is undefined")
        self._check_value(j, x)
        self._check_attribute(k)
        cached = self._dist_cache.get((j, k))
        if cached is None:
            key = (j, k) if j < k else (k, j)
            table = self._pair_counts.get(key)
            if table is None:
                table = self._build_pair_table(*key)
                self._pair_counts[key] = table
            cached = {}
            for pair, count in table.items():
                xx, ww = pair if j < k else pair[::-1]
                cached.setdefault(xx, {})[ww] = count / len(self._inverted[j][xx])
            self._dist_cache[(j, k)] = cached
        return cached.get(x, {})

    # -- debug dump ----------------------------------------------------------

    def dump(self, path: str) -> None:
        """Write the full assignment as 'item<TAB>attr<TAB>value' lines."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            for i, item in enumerate(self.item_labels):
                for j, attr in enumerate(self.attribute_names):
                    value = self.value_labels[j][self.assignment[i, j]]
                    handle.write(f"{item}\t{attr}\t{value}\n")

    @classmethod
    def from_dump(cls, path: str) -> "AttributeSpace":
        """Rebuild a space from its own dump; ids and counts come out identical."""
        rows: dict[str, dict[str, str]] = {}
        attrs: list[str] = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                item, attr, value = line.split("\t")
                if attr not in attrs:
                    attrs.append(attr)
                rows.setdefault(item, {})[attr] = value
        records = [(item, [values[a] for a in attrs]) for item, values in rows.items()]
        return build_space(records, attrs)

    # -- validation helpers --------------------------------------------------

    def _check_item(self, i: int) -> None:
        if not 0 <= i < self.n_items:
            raise ValueError(f"item id {i} out of range [0, {self.n_items})")

    def _check_attribute(self, j: int) -> None:
        if not 0 <= j < self.n_attributes:
            raise ValueError(f"attribute id {j} out of range [0, {self.n_attributes})")

    def _check_value(self, j: int, x: int) -> None:
        self._check_attribute(j)
        if not 0 <= x < len(self.value_labels[j]):
            raise ValueError(
                f"value id {x} out of range for attribute {self.attribute_names[j]!r}"
            )


def build_space(
    records: Iterable[tuple[str, Sequence[str | None]]],
    attribute_names: Sequence[str],
) -> AttributeSpace:
    """Intern (item label, per-attribute value labels) records into an AttributeSpace.

    Records must all carry one value per schema attribute; missing values
    (None or blank) are canonicalized to :data:`MISSING_VALUE` so the
    assignment stays total. Ids are assigned in first-appearance order.

    Raises:
        ValueError: on a duplicate item label or a record of wrong arity.
    """
    attribute_names = [str(a) for a in attribute_names]
    n_attrs = len(attribute_names)
    item_labels: list[str] = []
    seen: set[str] = set()
    value_labels: list[list[str]] = [[] for _ in range(n_attrs)]
    value_index: list[dict[str, int]] = [{} for _ in range(n_attrs)]
    rows: list[list[int]] = []

    for label, values in records:
        label = str(label)
        if label in seen:
            raise ValueError(f"duplicate item label: {label!r}")
        if len(values) != n_attrs:
            raise ValueError(
                f"record {label!r} has {len(values)} values, schema has {n_attrs} attributes"
            )
        seen.add(label)
        item_labels.append(label)
        row: list[int] = []
        for j, raw in enumerate(values):
            value = _canonical(raw)
            x = value_index[j].get(value)
            if x is None:
                x = len(value_labels[j])
                value_index[j][value] = x
                value_labels[j].append(value)
            row.append(x)
        rows.append(row)

    assignment = np.asarray(rows, dtype=np.int64).reshape(len(item_labels), n_attrs)
    return AttributeSpace(item_labels, attribute_names, value_labels, assignment)
