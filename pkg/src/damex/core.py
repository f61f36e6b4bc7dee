"""Shared domain types: datasets, feature subsets, cone mass maps and models.

Feature indices are 0-based everywhere inside the library. User-facing text
(CLI output, model files, ``str(subset)``) uses 1-based indices; conversion
happens in :meth:`FeatureSubset.from_one_based` and
:meth:`FeatureSubset.one_based`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Union

import numpy as np

AUTO = "auto"

MuMin = Union[float, str]


class DataError(ValueError):
    """Raised when input data violates a dataset or model invariant."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` matrix of finite feature values with optional 0/1 labels."""

    values: np.ndarray
    labels: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("inconsistent dimension: expected a 2-D array")
        if values.shape[1] < 1:
            raise DataError("inconsistent dimension: d must be >= 1")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            r, c = bad[0]
            raise DataError(f"invalid value at ({r}, {c})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (values.shape[0],):
                raise DataError(
                    f"label count {labels.size} does not match {values.shape[0]} rows"
                )
            if labels.size and not np.isin(labels, (0, 1)).all():
                raise DataError("labels must be 0 (normal) or 1 (anomaly)")
            labels = labels.astype(np.int8)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != values.shape[1]:
                raise DataError(
                    f"{len(names)} feature names given for {values.shape[1]} columns"
                )
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.n

    def subset(self, rows) -> Dataset:
        """Row selection by index array or boolean mask."""
        labels = None if self.labels is None else self.labels[rows]
        return Dataset(self.values[rows], labels, self.feature_names)


def validate_dataset(rows, labels=None, feature_names=None) -> Dataset:
    """Build a :class:`Dataset` from raw rows, checking every invariant.

    ``rows`` may be a 2-D array or any sequence of sequences (possibly ragged,
    in which case an error is raised).
    """
    if isinstance(rows, Dataset):
        return rows
    if isinstance(rows, np.ndarray):
        if rows.size == 0:
            raise DataError("empty dataset")
        return Dataset(rows, labels, feature_names)

    rows = [list(r) for r in rows]
    if not rows:
        raise DataError("empty dataset")
    d = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != d:
            raise DataError(
                f"inconsistent dimension: row {i} has {len(r)} values, expected {d}"
            )
    values = np.empty((len(rows), d), dtype=np.float64)
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            try:
                x = float(x)
            except (TypeError, ValueError):
                raise DataError(f"invalid value at ({i}, {j}): {x!r}") from None
            if not math.isfinite(x):
                raise DataError(f"invalid value at ({i}, {j}): {x!r}")
            values[i, j] = x
    return Dataset(values, labels, feature_names)


def as_matrix(data, d: int | None = None) -> np.ndarray:
    """Coerce a Dataset, array or 1-D point into a 2-D float array."""
    if isinstance(data, Dataset):
        X = data.values
    else:
        X = np.asarray(data, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2:
            raise DataError("wrong dimension: expected a point or a 2-D batch")
        if X.size and not np.isfinite(X).all():
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"invalid value at ({r}, {c})")
    if d is not None and X.shape[1] != d and not (X.shape[0] == 0 and X.size == 0):
        raise DataError(f"wrong dimension: got {X.shape[1]} features, model has {d}")
    return X


@dataclass(frozen=True, order=True)
class FeatureSubset:
    """A non-empty set of feature indices, stored sorted (0-based).

    Two subsets with the same members compare and hash equal, so they can be
    used directly as mapping keys. No fixed-width bitmask is involved, so any
    dimension is supported.
    """

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("feature subset must be non-empty")
        if idx[0] < 0 or any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing and >= 0: {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, members: Iterable[int]) -> FeatureSubset:
        """Subset from 0-based members in any order (duplicates collapse)."""
        return cls(tuple(sorted(set(int(m) for m in members))))

    @classmethod
    def from_one_based(cls, members: Iterable[int]) -> FeatureSubset:
        return cls.of(int(m) - 1 for m in members)

    @classmethod
    def from_mask(cls, mask) -> FeatureSubset:
        return cls(tuple(np.flatnonzero(mask).tolist()))

    def one_based(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in self.indices)

    def mask(self, d: int) -> np.ndarray:
        if self.indices[-1] >= d:
            raise ValueError(f"subset {self} does not fit in dimension {d}")
        m = np.zeros(d, dtype=bool)
        m[list(self.indices)] = True
        return m

    def __len__(self):
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, j) -> bool:
        return j in self.indices

    def __str__(self):
        return "{" + ",".join(str(i) for i in self.one_based()) + "}"


def mask_key(mask_rows: np.ndarray) -> list[bytes]:
    """Hashable byte keys for the rows of a boolean membership matrix."""
    packed = np.packbits(np.ascontiguousarray(mask_rows, dtype=bool), axis=1)
    return [row.tobytes() for row in packed]


def subset_key(subset: FeatureSubset, d: int) -> bytes:
    return mask_key(subset.mask(d)[None, :])[0]


@dataclass(frozen=True, eq=False)
class ConeMassMap(Mapping):
    """Sparse map from :class:`FeatureSubset` to cone mass ``count / k``.

    Only subsets with a positive count are stored. Raw integer counts are kept
    alongside so that mass conservation can be checked exactly.
    """

    counts: Mapping[FeatureSubset, int]
    k: int
    n_extreme: int

    def __post_init__(self):
        counts = {}
        for subset, c in self.counts.items():
            if not isinstance(subset, FeatureSubset):
                subset = FeatureSubset.of(subset)
            c = int(c)
            if c < 0:
                raise ValueError("cone counts must be non-negative")
            if c > 0:
                counts[subset] = c
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "counts", MappingProxyType(dict(sorted(counts.items()))))

    def __getitem__(self, subset) -> float:
        return self.counts[subset] / self.k

    def __iter__(self):
        return iter(self.counts)

    def __len__(self):
        return len(self.counts)

    @property
    def total_count(self) -> int:
        return sum(self.counts.values())

    @property
    def total_mass(self) -> float:
        return self.total_count / self.k

    def masses(self) -> dict[FeatureSubset, float]:
        return {s: c / self.k for s, c in self.counts.items()}

    def charged(self) -> set[FeatureSubset]:
        return set(self.counts)


@dataclass(frozen=True)
class DamexParams:
    """Hyperparameters of a DAMEX fit.

    ``k=None`` resolves to ``ceil(sqrt(n))`` at fit time. ``mu_min`` is either a
    non-negative float or ``"auto"`` (average mass of the charged cones).
    """

    k: int | None = None
    epsilon: float = 0.01
    mu_min: MuMin = AUTO

    def __post_init__(self):
        if self.k is not None:
            if int(self.k) != self.k or self.k < 1:
                raise ValueError(f"k must be a positive integer, got {self.k}")
            object.__setattr__(self, "k", int(self.k))
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if isinstance(self.mu_min, str):
            if self.mu_min != AUTO:
                raise ValueError(f"mu_min must be a number or 'auto', got {self.mu_min!r}")
        elif not self.mu_min >= 0:
            raise ValueError(f"mu_min must be >= 0, got {self.mu_min}")

    def resolve(self, n: int) -> DamexParams:
        """Fill in the default ``k`` for a training set of size ``n``."""
        k = self.k if self.k is not None else math.ceil(math.sqrt(n))
        if k > n:
            raise ValueError(f"k exceeds sample size ({k} > {n})")
        return DamexParams(k, self.epsilon, self.mu_min)


@dataclass(frozen=True, eq=False)
class EmpiricalMarginals:
    """Per-feature sorted training columns; realizes the fitted empirical CDFs.

    ``sorted_columns`` has shape ``(d, n)``, each row non-decreasing.
    """

    sorted_columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.sorted_columns, dtype=np.float64)
        if cols.ndim != 2:
            raise ValueError("sorted_columns must be 2-D (d, n)")
        if cols.shape[1] > 1 and (np.diff(cols, axis=1) < 0).any():
            raise ValueError("marginal columns must be non-decreasing")
        cols.setflags(write=False)
        object.__setattr__(self, "sorted_columns", cols)

    @property
    def n(self) -> int:
        return self.sorted_columns.shape[1]

    @property
    def d(self) -> int:
        return self.sorted_columns.shape[0]


@dataclass(frozen=True, eq=False)
class DamexModel:
    """A fitted DAMEX model: marginals, thresholded cone masses, parameters.

    ``mu_min_value`` is the numeric threshold that was actually applied (equal
    to ``params.mu_min`` unless that was ``"auto"``).
    """

    marginals: EmpiricalMarginals
    masses: ConeMassMap
    params: DamexParams
    mu_min_value: float = 0.0
    raw_n_charged: int = 0
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.params.k is None:
            raise ValueError("model params must have a resolved k")
        if self.masses.k != self.params.k:
            raise ValueError("cone map k does not match params")
        d = self.marginals.d
        lookup = {}
        for subset, c in self.masses.counts.items():
            lookup[subset_key(subset, d)] = c / self.params.k
        object.__setattr__(self, "_lookup", lookup)

    @property
    def n(self) -> int:
        return self.marginals.n

    @property
    def d(self) -> int:
        return self.marginals.d

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    @property
    def radial_threshold(self) -> float:
        return self.n / self.k

    def mass_of_keys(self, keys: Sequence[bytes]) -> np.ndarray:
        """Cone masses for packed membership keys (0 for uncharged cones)."""
        get = self._lookup.get
        return np.fromiter((get(key, 0.0) for key in keys), dtype=np.float64, count=len(keys))
