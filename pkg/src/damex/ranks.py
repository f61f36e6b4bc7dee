"""Marginal rank transformation to the standard Pareto scale.

The empirical CDF uses an ``n + 1`` denominator, ``F(x) = #{X_i <= x} / (n + 1)``,
so the transform ``1 / (1 - F)`` stays finite at the sample maximum. All
transformed values lie in ``[1, n + 1]``.
"""

from __future__ import annotations

import numpy as np

from .core import DataError, Dataset, EmpiricalMarginals, as_matrix


def fit_marginals(train: Dataset) -> EmpiricalMarginals:
    """Sort each training column; O(d n log n)."""
    X = as_matrix(train)
    if X.shape[0] < 2:
        raise DataError(f"insufficient data: need at least 2 rows, got {X.shape[0]}")
    return EmpiricalMarginals(np.sort(X, axis=0).T.copy())


def _le_counts(marginals: EmpiricalMarginals, X: np.ndarray) -> np.ndarray:
    counts = np.empty(X.shape, dtype=np.int64)
    for j, col in enumerate(marginals.sorted_columns):
        counts[:, j] = np.searchsorted(col, X[:, j], side="right")
    return counts


def ecdf_eval(marginals: EmpiricalMarginals, j: int, x: float) -> float:
    """Empirical CDF of feature ``j`` (0-based) at ``x``, always below 1."""
    if not 0 <= j < marginals.d:
        raise IndexError(f"feature index {j} out of range for d={marginals.d}")
    count = np.searchsorted(marginals.sorted_columns[j], x, side="right")
    return int(count) / (marginals.n + 1)


def transform_batch(marginals: EmpiricalMarginals, data) -> np.ndarray:
    """Rank-transform every row of ``data``; returns an ``(m, d)`` array.

    Each entry is ``(n + 1) / (n + 1 - c)`` where ``c`` counts training values
    ``<= x_j``; this is ``1 / (1 - F(x_j))`` written as a single rounding.
    """
    X = as_matrix(data, marginals.d)
    if X.shape[0] == 0:
        return np.empty((0, marginals.d))
    n1 = marginals.n + 1
    return n1 / (n1 - _le_counts(marginals, X)).astype(np.float64)


def transform_point(marginals: EmpiricalMarginals, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (marginals.d,):
        raise DataError(f"wrong dimension: expected {marginals.d} values, got {x.shape}")
    return transform_batch(marginals, x[None, :])[0]
