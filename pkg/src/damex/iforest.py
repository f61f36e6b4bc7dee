"""Isolation Forest baseline (Liu, Ting and Zhou, 2008).

Trees are stored as flat arrays so that scoring a batch is a fixed number of
vectorized steps per tree. Scores follow the usual ``2 ** (-E[h(x)] / c(psi))``
convention: larger means more abnormal, values lie in (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_matrix

EULER_GAMMA = 0.5772156649015329


_HARMONIC_TABLE = np.cumsum(np.r_[0.0, 1.0 / np.arange(1, 65)])


def _harmonic(m: np.ndarray) -> np.ndarray:
    """Harmonic numbers: exact below 65, asymptotic series (error < 1e-12) above."""
    m = np.asarray(m, dtype=np.float64)
    small = m < len(_HARMONIC_TABLE)
    out = np.empty_like(m)
    out[small] = _HARMONIC_TABLE[m[small].astype(np.int64)]
    big = m[~small]
    big2 = big * big
    out[~small] = np.log(big) + EULER_GAMMA + 0.5 / big - 1.0 / (12.0 * big2) + 1.0 / (120.0 * big2 * big2)
    return out


def average_path_length(n) -> np.ndarray:
    """``c(n)``: mean unsuccessful-search path length in a BST of ``n`` nodes."""
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    out[n == 2] = 1.0
    big = n > 2
    m = n[big]
    out[big] = 2.0 * _harmonic(m - 1.0) - 2.0 * (m - 1.0) / m
    return out


@dataclass(frozen=True, eq=False)
class IsolationTree:
    """Flat-array binary tree. Leaves have ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    size: np.ndarray

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        for _ in range(self.max_depth):
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            go_left = X[rows, np.maximum(feat, 0)] < self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)
        return self.depth[node] + average_path_length(self.size[node])


def _grow(X: np.ndarray, height_limit: int, rng: np.random.Generator) -> IsolationTree:
    feature, threshold, left, right, depth, size = [], [], [], [], [], []

    def new_node(d, s):
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (depth, d), (size, s)):
            arr.append(v)
        return len(feature) - 1

    stack = [(np.arange(len(X)), 0, new_node(0, len(X)))]
    while stack:
        idx, d, node = stack.pop()
        if d >= height_limit or len(idx) <= 1:
            continue
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            continue
        j = int(rng.choice(splittable))
        # both children must be non-empty: lo < split <= hi
        split = min(max(rng.uniform(lo[j], hi[j]), np.nextafter(lo[j], np.inf)), hi[j])
        goes_left = sub[:, j] < split
        feature[node], threshold[node] = j, split
        left_idx, right_idx = idx[goes_left], idx[~goes_left]
        left[node] = new_node(d + 1, len(left_idx))
        right[node] = new_node(d + 1, len(right_idx))
        stack.append((left_idx, d + 1, left[node]))
        stack.append((right_idx, d + 1, right[node]))

    return IsolationTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(depth, dtype=np.float64),
        np.array(size, dtype=np.float64),
    )


@dataclass(frozen=True, eq=False)
class IsolationForest:
    trees: tuple[IsolationTree, ...]
    subsample_size: int
    d: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def height_limit(self) -> int:
        return math.ceil(math.log2(max(self.subsample_size, 2)))

    def mean_path_length(self, data) -> np.ndarray:
        X = as_matrix(data, self.d)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.path_lengths(X)
        return total / self.n_trees

    def score(self, data) -> np.ndarray:
        """Anomaly scores in (0, 1]; larger is more abnormal."""
        c = float(average_path_length(self.subsample_size)) or 1.0
        return 2.0 ** (-self.mean_path_length(data) / c)


def fit_iforest(train, n_trees: int = 100, subsample_size: int | None = None, rng=None) -> IsolationForest:
    """Grow ``n_trees`` isolation trees on uniform subsamples without replacement.

    ``subsample_size`` defaults to ``min(256, n)``.
    """
    X = as_matrix(train)
    n = len(X)
    if n_trees < 1:
        raise ValueError("empty forest: n_trees must be >= 1")
    if subsample_size is None:
        subsample_size = min(256, n)
    if not 1 <= subsample_size <= n:
        raise ValueError(f"subsample_size must be in [1, {n}], got {subsample_size}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    height_limit = math.ceil(math.log2(max(subsample_size, 2)))
    trees = tuple(
        _grow(X[rng.choice(n, size=subsample_size, replace=False)], height_limit, rng)
        for _ in range(n_trees)
    )
    return IsolationForest(trees, subsample_size, X.shape[1])


def iforest_score(forest: IsolationForest, x) -> np.ndarray | float:
    """Score a single point (returns float) or a batch (returns array)."""
    x_arr = np.asarray(x.values if hasattr(x, "values") else x, dtype=np.float64)
    if x_arr.ndim == 1:
        return float(forest.score(x_arr[None, :])[0])
    return forest.score(x_arr)
