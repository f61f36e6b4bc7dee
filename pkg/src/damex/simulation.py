"""Multivariate asymmetric logistic sampling and support-recovery experiments.

The asymmetric logistic law used here has c.d.f.

    G(x) = exp{ -sum_m ( sum_{j in a_m} (|A(j)| x_j)^(-1/w_m) )^(w_m) }

where ``A(j)`` is the set of planted subsets containing feature ``j``. Every
margin is unit Frechet. Sampling follows Stephenson's construction: one
positive stable variable per subset, independent exponentials per coordinate,
and a max over the subsets containing each coordinate.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .cones import fit_damex
from .core import AUTO, ConeMassMap, Dataset, DamexParams, FeatureSubset


@dataclass(frozen=True)
class LogisticSpec:
    """Planted support and dependence parameters of an asymmetric logistic law."""

    d: int
    subsets: tuple[FeatureSubset, ...]
    w: tuple[float, ...] | float = 0.1
    seed: int | None = None

    def __post_init__(self):
        subsets = tuple(
            s if isinstance(s, FeatureSubset) else FeatureSubset.of(s) for s in self.subsets
        )
        if not subsets:
            raise ValueError("at least one subset is required")
        if len(set(subsets)) != len(subsets):
            raise ValueError("subsets must be distinct")
        for s in subsets:
            if s.indices[-1] >= self.d:
                raise ValueError(f"subset {s} exceeds dimension {self.d}")
        covered = set().union(*(s.indices for s in subsets))
        missing = sorted(set(range(self.d)) - covered)
        if missing:
            raise ValueError(f"features {[j + 1 for j in missing]} belong to no subset")
        w = self.w
        w = (float(w),) * len(subsets) if np.isscalar(w) else tuple(float(x) for x in w)
        if len(w) != len(subsets):
            raise ValueError("need one dependence parameter per subset")
        if not all(0.0 < x <= 1.0 for x in w):
            raise ValueError("dependence parameters must lie in (0, 1]")
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "w", w)

    @property
    def K(self) -> int:
        return len(self.subsets)

    def multiplicity(self) -> np.ndarray:
        """``|A(j)|`` for every feature."""
        counts = np.zeros(self.d, dtype=np.int64)
        for s in self.subsets:
            counts[list(s.indices)] += 1
        return counts


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def sample_positive_stable(w: float, rng=None, size=None):
    """Positive stable draw(s) with Laplace transform ``E exp(-tS) = exp(-t^w)``.

    Uses the Chambers-Mallows-Stuck / Kanter representation
    ``S = sin(wU) / sin(U)^(1/w) * (sin((1-w)U) / E)^((1-w)/w)``
    with ``U ~ Uniform(0, pi)`` and ``E ~ Exp(1)``. ``w = 1`` gives the constant 1.
    """
    if not 0.0 < w <= 1.0:
        raise ValueError(f"stable exponent must lie in (0, 1], got {w}")
    rng = _rng(rng)
    if w == 1.0:
        return 1.0 if size is None else np.ones(size)
    U = rng.uniform(0.0, np.pi, size=size)
    E = rng.standard_exponential(size=size)
    S = (
        np.sin(w * U) / np.sin(U) ** (1.0 / w)
        * (np.sin((1.0 - w) * U) / E) ** ((1.0 - w) / w)
    )
    return float(S) if size is None else S


def sample_asymmetric_logistic(spec: LogisticSpec, n: int, rng=None) -> Dataset:
    """Draw ``n`` i.i.d. rows from the asymmetric logistic law of ``spec``.

    ``rng`` defaults to a generator seeded with ``spec.seed``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(spec.seed if rng is None else rng)
    inv_mult = 1.0 / spec.multiplicity()
    X = np.zeros((n, spec.d))
    for subset, w in zip(spec.subsets, spec.w):
        idx = list(subset.indices)
        S = sample_positive_stable(w, rng, size=n)
        E = rng.standard_exponential(size=(n, len(idx)))
        Z = (S[:, None] / E) ** w * inv_mult[idx]
        X[:, idx] = np.maximum(X[:, idx], Z)
    return Dataset(X)


def random_support(
    d: int, K: int, rng=None, min_size: int = 2, max_size: int = 8
) -> list[FeatureSubset]:
    """Draw ``K`` distinct subsets covering every feature.

    Subset sizes are uniform on ``[min_size, min(d, max_size)]`` and members
    uniform given the size. Features left uncovered are then added to the
    smallest subsets (one feature each, ties by draw order) as long as that
    keeps the subsets distinct.
    """
    rng = _rng(rng)
    hi = min(d, max_size)
    lo = min(min_size, hi)
    n_available = sum(math.comb(d, s) for s in range(lo, hi + 1))
    if K < 1 or K > n_available:
        raise ValueError(f"infeasible K={K}: {n_available} subsets of size {lo}..{hi}")
    if K == 1 and hi < d:
        raise ValueError(f"infeasible K=1: a single subset of size <= {hi} cannot cover d={d}")

    chosen: list[set[int]] = []
    seen: set[frozenset[int]] = set()
    while len(chosen) < K:
        size = int(rng.integers(lo, hi + 1))
        members = frozenset(rng.choice(d, size=size, replace=False).tolist())
        if members not in seen:
            seen.add(members)
            chosen.append(set(members))

    for j in range(d):
        if any(j in s for s in chosen):
            continue
        order = sorted(range(K), key=lambda m: len(chosen[m]))
        for m in order:
            grown = frozenset(chosen[m] | {j})
            if grown not in seen:
                seen.discard(frozenset(chosen[m]))
                seen.add(grown)
                chosen[m].add(j)
                break
        else:
            raise ValueError(f"could not cover feature {j + 1} with distinct subsets")
    return [FeatureSubset.of(s) for s in chosen]


def recovery_errors(true_support, estimated) -> int:
    """``|D symmetric-difference D_hat|``: missed plus falsely discovered subsets."""
    truth = {s if isinstance(s, FeatureSubset) else FeatureSubset.of(s) for s in true_support}
    if isinstance(estimated, ConeMassMap):
        found = estimated.charged()
    else:
        found = {s if isinstance(s, FeatureSubset) else FeatureSubset.of(s) for s in estimated}
    return len(truth ^ found)


@dataclass(frozen=True)
class RecoveryRow:
    K: int
    n: int
    runs: int
    mean_errors: float
    std_errors: float


def _run_seeds(master_seed: int, K: int, n: int, runs: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence([master_seed, K, n]).spawn(runs)


def recovery_run(d: int, K: int, n: int, seed, params: DamexParams, w: float = 0.1) -> int:
    """One draw of support, sample, fit, and error count."""
    rng = np.random.default_rng(seed)
    support = random_support(d, K, rng)
    data = sample_asymmetric_logistic(LogisticSpec(d, tuple(support), w), n, rng)
    model = fit_damex(data, params)
    return recovery_errors(support, model.masses)


def support_recovery_experiment(
    d: int = 10,
    K_values: Sequence[int] = (3, 5, 10),
    n_values: Sequence[int] = (50_000,),
    runs: int = 20,
    params: DamexParams | None = None,
    w: float = 0.1,
    seed: int = 0,
) -> list[RecoveryRow]:
    """Mean support-recovery errors for every ``(K, n)`` pair.

    Each run uses its own child seed derived from ``(seed, K, n)``, so the
    table does not depend on evaluation order.
    """
    if runs < 1:
        raise ValueError("no runs requested")
    if d < 1 or any(K < 1 for K in K_values) or any(n < 2 for n in n_values):
        raise ValueError("d, K and n must be positive")
    rows = []
    for K, n in itertools.product(K_values, n_values):
        p = params or default_recovery_params(n)
        errors = [recovery_run(d, K, n, s, p, w) for s in _run_seeds(seed, K, n, runs)]
        rows.append(RecoveryRow(K, n, runs, float(np.mean(errors)), float(np.std(errors))))
    return rows


def default_recovery_params(n: int) -> DamexParams:
    return DamexParams(k=math.ceil(math.sqrt(n)), epsilon=0.05, mu_min=AUTO)


def two_d_benchmark(n_train: int = 5000, n_test_normal: int = 5000, n_anomalies: int = 250,
                    upper: float = 100.0, rng=None) -> tuple[Dataset, Dataset]:
    """Bivariate toy problem: normal data have extremes only along the axes
    (support ``{1}, {2}``), anomalies are uniform on ``[0, upper]^2``.

    Returns a normal-only training set and a labelled test set.
    """
    rng = _rng(rng)
    spec = LogisticSpec(2, (FeatureSubset((0,)), FeatureSubset((1,))))
    train = sample_asymmetric_logistic(spec, n_train, rng)
    normal = sample_asymmetric_logistic(spec, n_test_normal, rng).values
    anomalies = rng.uniform(0.0, upper, size=(n_anomalies, 2))
    labels = np.r_[np.zeros(n_test_normal, np.int8), np.ones(n_anomalies, np.int8)]
    return train, Dataset(np.vstack([normal, anomalies]), labels)
