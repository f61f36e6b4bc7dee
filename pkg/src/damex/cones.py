"""Assignment of rank-transformed points to epsilon-cones and mass estimation."""

from __future__ import annotations

import logging
from collections import Counter

import numpy as np

from .core import (
    AUTO,
    ConeMassMap,
    DamexModel,
    DamexParams,
    FeatureSubset,
    MuMin,
    as_matrix,
)
from .ranks import fit_marginals, transform_batch

logger = logging.getLogger(__name__)


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")


def cone_masks(V: np.ndarray, epsilon: float) -> np.ndarray:
    """Boolean membership matrix: ``V[i, j] > epsilon * max_j V[i, j]``."""
    V = np.asarray(V, dtype=np.float64)
    return V > epsilon * V.max(axis=1, keepdims=True)


def assign_cone(v, epsilon: float) -> FeatureSubset:
    """The unique subset alpha with ``v`` in the epsilon-cone of alpha."""
    _check_epsilon(epsilon)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("v must be a non-empty vector")
    if (v < 0).any():
        raise ValueError("v must be non-negative")
    if not v.max() > 0:
        raise ValueError("point at origin, no cone")
    return FeatureSubset.from_mask(cone_masks(v[None, :], epsilon)[0])


def estimate_cone_masses(V, k: int, epsilon: float) -> ConeMassMap:
    """Count extreme rows (``max V_i >= n/k``) per epsilon-cone; mass = count/k."""
    _check_epsilon(epsilon)
    V = as_matrix(V)
    n, d = V.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k exceeds sample size ({k} > {n})")
    norms = V.max(axis=1)
    extreme = V[norms >= n / k]
    if len(extreme) == 0:
        return ConeMassMap({}, k, 0)
    masks = cone_masks(extreme, epsilon)
    rows, counts = np.unique(masks, axis=0, return_counts=True)
    cone_counts = {FeatureSubset.from_mask(r): int(c) for r, c in zip(rows, counts)}
    return ConeMassMap(cone_counts, k, len(extreme))


def auto_mu_min(masses: ConeMassMap) -> float:
    """Average mass over charged cones: total mass / number of charged cones."""
    if len(masses) == 0:
        return 0.0
    return masses.total_mass / len(masses)


def threshold_masses(masses: ConeMassMap, mu_min: MuMin) -> ConeMassMap:
    """Drop cones with mass ``<= mu_min`` (``mu_min = 0`` keeps everything)."""
    level = _resolve_mu_min(masses, mu_min)
    if level == 0:
        return masses
    kept = {s: c for s, c in masses.counts.items() if c / masses.k > level}
    return ConeMassMap(kept, masses.k, masses.n_extreme)


def _resolve_mu_min(masses: ConeMassMap, mu_min: MuMin) -> float:
    if isinstance(mu_min, str):
        if mu_min != AUTO:
            raise ValueError(f"mu_min must be a number or 'auto', got {mu_min!r}")
        return auto_mu_min(masses)
    if mu_min < 0:
        raise ValueError("mu_min must be >= 0")
    return float(mu_min)


def fit_damex(train, params: DamexParams | None = None) -> DamexModel:
    """Fit marginals, estimate cone masses and threshold them."""
    params = (params or DamexParams()).resolve(as_matrix(train).shape[0])
    marginals = fit_marginals(train)
    V = transform_batch(marginals, train)
    raw = estimate_cone_masses(V, params.k, params.epsilon)
    level = _resolve_mu_min(raw, params.mu_min)
    kept = threshold_masses(raw, level)
    logger.debug(
        "DAMEX fit: n=%d k=%d eps=%g, %d extremes, %d -> %d charged cones",
        marginals.n, params.k, params.epsilon, raw.n_extreme, len(raw), len(kept),
    )
    return DamexModel(marginals, kept, params, mu_min_value=level, raw_n_charged=len(raw))


def census(masses: ConeMassMap) -> dict[int, float]:
    """Total mass per cone dimension ``|alpha|``."""
    by_dim: Counter[int] = Counter()
    for subset, c in masses.counts.items():
        by_dim[len(subset)] += c
    return {dim: by_dim[dim] / masses.k for dim in sorted(by_dim)}
