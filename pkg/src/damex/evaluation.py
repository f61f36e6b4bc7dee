"""Ranking metrics, the combined extreme / non-extreme detector, repeated
train-test evaluation and the parameter stability scan.

Every abnormality key produced here is oriented "larger = more abnormal".
Keys may carry several columns, compared lexicographically; later columns
only break ties left by earlier ones.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .cones import estimate_cone_masses, fit_damex, threshold_masses
from .core import DamexModel, DamexParams, Dataset, FeatureSubset, as_matrix
from .iforest import IsolationForest, fit_iforest
from .ranks import fit_marginals, transform_batch
from .scoring import score_details

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RankedScores:
    """Abnormality keys (larger = more abnormal) paired with 0/1 labels."""

    keys: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        keys = np.asarray(self.keys, dtype=np.float64)
        if keys.ndim == 1:
            keys = keys[:, None]
        labels = np.asarray(self.labels).astype(np.int8)
        if keys.ndim != 2 or len(keys) != len(labels):
            raise ValueError("keys and labels must have the same length")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def subset(self, rows) -> RankedScores:
        return RankedScores(self.keys[rows], self.labels[rows])


def _check_labels(scores: RankedScores) -> tuple[int, int]:
    pos = int(scores.labels.sum())
    neg = len(scores) - pos
    if pos == 0 or neg == 0:
        raise ValueError("degenerate labels: both classes are required")
    return pos, neg


def _descending_groups(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row order by decreasing key, and the start offsets of tie groups."""
    order = np.lexsort(keys.T[::-1])[::-1]
    k = keys[order]
    new_group = np.ones(len(k), dtype=bool)
    new_group[1:] = (k[1:] != k[:-1]).any(axis=1)
    return order, np.flatnonzero(new_group)


def _cumulative_counts(scores: RankedScores):
    order, starts = _descending_groups(scores.keys)
    y = scores.labels[order]
    ends = np.append(starts[1:], len(y)) - 1
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    return tp, fp


def roc_curve(scores: RankedScores) -> tuple[np.ndarray, np.ndarray]:
    """``(fpr, tpr)`` points, one per distinct key, starting at (0, 0)."""
    pos, neg = _check_labels(scores)
    tp, fp = _cumulative_counts(scores)
    return np.r_[0.0, fp / neg], np.r_[0.0, tp / pos]


def roc_auc(scores: RankedScores) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (midranks)."""
    pos, neg = _check_labels(scores)
    order, starts = _descending_groups(scores.keys)
    n = len(order)
    ends = np.append(starts[1:], n)
    # ascending rank r of a group spanning descending positions [s, e)
    mid = n - (starts + ends - 1) / 2.0
    ranks = np.empty(n)
    ranks[order] = np.repeat(mid, ends - starts)
    rank_sum = ranks[scores.labels == 1].sum()
    return float((rank_sum - pos * (pos + 1) / 2.0) / (pos * neg))


def pr_curve(scores: RankedScores) -> tuple[np.ndarray, np.ndarray]:
    """``(recall, precision)`` points, one per distinct key, anomalies positive."""
    pos, _ = _check_labels(scores)
    tp, fp = _cumulative_counts(scores)
    return tp / pos, tp / (tp + fp)


def pr_auc(scores: RankedScores) -> float:
    """Step-interpolated area under the precision-recall curve
    (sum of precision times recall increments)."""
    recall, precision = pr_curve(scores)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def write_curve(path, x: np.ndarray, y: np.ndarray, names=("fpr", "tpr")) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{names[0]},{names[1]}\n")
        for a, b in zip(x, y):
            fh.write(f"{a:.17g},{b:.17g}\n")


def damex_keys(model: DamexModel, data) -> np.ndarray:
    """Oriented DAMEX keys ``[-s_n, norm]``: ties in ``s_n`` (notably the 0 score
    of uncharged cones) are broken by the larger sup-norm."""
    det = score_details(model, data)
    return np.column_stack([-det.scores, det.norms])


def _ecdf(reference: np.ndarray, values: np.ndarray) -> np.ndarray:
    ref = np.sort(reference)
    return np.searchsorted(ref, values, side="right") / len(ref)


@dataclass(frozen=True, eq=False)
class CombinedDetector:
    """DAMEX on the extreme region, a baseline detector elsewhere.

    Raw keys of each region are mapped to their empirical quantile among the
    calibration (training) points of that region, putting both regions on a
    common [0, 1] scale. Output keys are ``[quantile, raw_key, norm]``.
    """

    damex: DamexModel
    baseline: IsolationForest
    extreme_reference: np.ndarray
    bulk_reference: np.ndarray
    warnings: tuple[str, ...] = field(default=())

    @classmethod
    def calibrate(cls, damex: DamexModel, baseline: IsolationForest, calibration) -> CombinedDetector:
        X = as_matrix(calibration, damex.d)
        det = score_details(damex, X)
        ext_ref = -det.scores[det.extreme]
        bulk_ref = baseline.score(X[~det.extreme])
        notes = []
        for name, ref in (("extreme", ext_ref), ("non-extreme", bulk_ref)):
            if len(ref) == 0:
                msg = f"no calibration points in the {name} region; using raw scores there"
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
                logger.warning(msg)
                notes.append(msg)
        return cls(damex, baseline, ext_ref, bulk_ref, tuple(notes))

    @classmethod
    def fit(cls, train, params: DamexParams | None = None, n_trees: int = 100,
            subsample_size: int | None = None, rng=None) -> CombinedDetector:
        damex = fit_damex(train, params)
        forest = fit_iforest(train, n_trees, subsample_size, rng)
        return cls.calibrate(damex, forest, train)

    def keys(self, data) -> np.ndarray:
        X = as_matrix(data, self.damex.d)
        det = score_details(self.damex, X)
        ext = det.extreme
        raw = np.empty(len(X))
        raw[ext] = -det.scores[ext]
        if (~ext).any():
            raw[~ext] = self.baseline.score(X[~ext])
        q = raw.copy()
        if len(self.extreme_reference):
            q[ext] = _ecdf(self.extreme_reference, raw[ext])
        if len(self.bulk_reference):
            q[~ext] = _ecdf(self.bulk_reference, raw[~ext])
        return np.column_stack([q, raw, det.norms])

    def extreme_mask(self, data) -> np.ndarray:
        return score_details(self.damex, data).extreme


def combined_score(damex: DamexModel, baseline: IsolationForest, calibration, x) -> np.ndarray:
    """Combined abnormality keys for ``x`` (a point or a batch)."""
    return CombinedDetector.calibrate(damex, baseline, calibration).keys(x)


# -- repeated semi-supervised evaluation -----------------------------------


@dataclass(frozen=True)
class SplitResult:
    roc_iforest: float
    pr_iforest: float
    roc_combined: float
    pr_combined: float
    roc_iforest_extreme: float = math.nan
    pr_iforest_extreme: float = math.nan
    roc_combined_extreme: float = math.nan
    pr_combined_extreme: float = math.nan


@dataclass(frozen=True)
class EvaluationSummary:
    splits: tuple[SplitResult, ...]

    def mean(self, name: str) -> float:
        vals = np.array([getattr(s, name) for s in self.splits], dtype=float)
        vals = vals[~np.isnan(vals)]
        return float(vals.mean()) if len(vals) else math.nan

    def std(self, name: str) -> float:
        vals = np.array([getattr(s, name) for s in self.splits], dtype=float)
        vals = vals[~np.isnan(vals)]
        return float(vals.std()) if len(vals) else math.nan

    def table(self) -> list[tuple[str, float, float]]:
        names = [f.name for f in SplitResult.__dataclass_fields__.values()]
        return [(name, self.mean(name), self.std(name)) for name in names]


def _safe(metric, scores: RankedScores) -> float:
    try:
        return metric(scores)
    except ValueError:
        return math.nan


def evaluate_split(train: Dataset, test: Dataset, params: DamexParams | None = None,
                   n_trees: int = 100, subsample_size: int | None = None, rng=None) -> SplitResult:
    """Fit on ``train`` (normal rows only are used), score ``test`` both ways."""
    if test.labels is None:
        raise ValueError("test set needs labels")
    normal = train if train.labels is None else train.subset(train.labels == 0)
    det = CombinedDetector.fit(normal, params, n_trees, subsample_size, rng)
    if_keys = det.baseline.score(test)
    comb = det.keys(test)
    ext = det.extreme_mask(test)
    s_if = RankedScores(if_keys, test.labels)
    s_cb = RankedScores(comb, test.labels)
    return SplitResult(
        roc_auc(s_if), pr_auc(s_if), roc_auc(s_cb), pr_auc(s_cb),
        _safe(roc_auc, s_if.subset(ext)), _safe(pr_auc, s_if.subset(ext)),
        _safe(roc_auc, s_cb.subset(ext)), _safe(pr_auc, s_cb.subset(ext)),
    )


def repeated_evaluation(data: Dataset, n_splits: int = 20, train_fraction: float = 0.5,
                        params: DamexParams | None = None, n_trees: int = 100,
                        seed: int = 0) -> EvaluationSummary:
    """Average over random train/test splits; training uses normal rows only."""
    if data.labels is None:
        raise ValueError("labelled data required")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    results = []
    for child in np.random.SeedSequence(seed).spawn(n_splits):
        rng = np.random.default_rng(child)
        perm = rng.permutation(data.n)
        cut = int(round(train_fraction * data.n))
        train, test = data.subset(perm[:cut]), data.subset(perm[cut:])
        results.append(evaluate_split(train, test, params, n_trees, None, rng))
    return EvaluationSummary(tuple(results))


# -- stability scan ----------------------------------------------------------


def jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class StabilityReport:
    k_grid: tuple[int, ...]
    epsilon_grid: tuple[float, ...]
    charged: dict[tuple[int, float], frozenset[FeatureSubset]]
    k_similarity: dict[float, tuple[float, ...]]
    epsilon_similarity: dict[int, tuple[float, ...]]
    stable_k: dict[float, int | None]
    stable_epsilon: dict[int, float | None]
    recommended: tuple[int, float] | None
    level: float

    def rows(self):
        """Flat ``(k, epsilon, n_charged, jaccard_prev_k, jaccard_prev_eps)`` rows."""
        for ei, eps in enumerate(self.epsilon_grid):
            for ki, k in enumerate(self.k_grid):
                jk = self.k_similarity[eps][ki - 1] if ki else math.nan
                je = self.epsilon_similarity[k][ei - 1] if ei else math.nan
                yield k, eps, len(self.charged[(k, eps)]), jk, je


def _largest_stable(grid: Sequence, sims: Sequence[float], level: float):
    """Largest grid value whose step down to the previous value is stable."""
    best = None
    for i in range(1, len(grid)):
        if sims[i - 1] >= level:
            best = grid[i]
    return best


def stability_scan(train, k_grid: Sequence[int], epsilon_grid: Sequence[float],
                   mu_min="auto", level: float = 0.9) -> StabilityReport:
    """Fit DAMEX over a ``(k, epsilon)`` grid and measure how much the set of
    charged cones moves between adjacent grid values (Jaccard similarity).

    ``stable_k[eps]`` is the largest ``k`` whose charged set is at least
    ``level``-similar to the one at the next smaller ``k``; likewise for
    ``stable_epsilon[k]``. ``recommended`` takes the largest stable ``k`` over
    all epsilons, then the stable epsilon at that ``k`` (falling back to the
    smallest epsilon).
    """
    k_grid = tuple(sorted(set(int(k) for k in k_grid)))
    epsilon_grid = tuple(sorted(set(float(e) for e in epsilon_grid)))
    if not k_grid or not epsilon_grid:
        raise ValueError("grids must be non-empty")
    X = as_matrix(train)
    n = len(X)
    if k_grid[0] < 1 or k_grid[-1] > n:
        raise ValueError(f"k grid must lie in [1, {n}]")
    for e in epsilon_grid:
        DamexParams(epsilon=e, mu_min=mu_min)

    marginals = fit_marginals(X)
    V = transform_batch(marginals, X)
    charged = {}
    for k in k_grid:
        for eps in epsilon_grid:
            raw = estimate_cone_masses(V, k, eps)
            charged[(k, eps)] = frozenset(threshold_masses(raw, mu_min).charged())

    k_sim = {
        eps: tuple(jaccard(charged[(a, eps)], charged[(b, eps)]) for a, b in zip(k_grid, k_grid[1:]))
        for eps in epsilon_grid
    }
    e_sim = {
        k: tuple(jaccard(charged[(k, a)], charged[(k, b)]) for a, b in zip(epsilon_grid, epsilon_grid[1:]))
        for k in k_grid
    }
    stable_k = {eps: _largest_stable(k_grid, k_sim[eps], level) for eps in epsilon_grid}
    stable_eps = {k: _largest_stable(epsilon_grid, e_sim[k], level) for k in k_grid}

    recommended = None
    candidates = [k for k in stable_k.values() if k is not None]
    if candidates:
        k_star = max(candidates)
        eps_star = stable_eps[k_star]
        recommended = (k_star, eps_star if eps_star is not None else epsilon_grid[0])
    return StabilityReport(k_grid, epsilon_grid, charged, k_sim, e_sim, stable_k, stable_eps,
                           recommended, level)


def power_grid(n: int, lo: float = 0.25, hi: float = 2 / 3, num: int = 8) -> list[int]:
    """``k`` values spaced geometrically over ``[n^lo, n^hi]``."""
    ks = np.unique(np.round(np.geomspace(n ** lo, n ** hi, num)).astype(int))
    return [int(k) for k in ks if 1 <= k <= n]
