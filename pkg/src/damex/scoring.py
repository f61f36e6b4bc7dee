"""The extreme scoring function: cone mass divided by the sup-norm of the
rank-transformed point. Smaller scores are more abnormal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import cone_masks
from .core import DamexModel, DataError, FeatureSubset, as_matrix, mask_key
from .ranks import transform_batch


@dataclass(frozen=True)
class ScoreDetails:
    """Per-row scoring internals, used by the CLI and the combined detector."""

    scores: np.ndarray
    norms: np.ndarray
    extreme: np.ndarray
    masks: np.ndarray
    charged: np.ndarray

    def cone(self, i: int) -> FeatureSubset:
        return FeatureSubset.from_mask(self.masks[i])


def score_details(model: DamexModel, data) -> ScoreDetails:
    X = as_matrix(data, model.d)
    V = transform_batch(model.marginals, X)
    if len(V) == 0:
        empty = np.empty(0)
        return ScoreDetails(empty, empty, empty.astype(bool), np.empty((0, model.d), bool), empty.astype(bool))
    norms = V.max(axis=1)
    masks = cone_masks(V, model.epsilon)
    mass = model.mass_of_keys(mask_key(masks))
    return ScoreDetails(
        scores=mass / norms,
        norms=norms,
        extreme=norms >= model.radial_threshold,
        masks=masks,
        charged=mass > 0,
    )


def score_batch(model: DamexModel, data) -> np.ndarray:
    """Score every row; uncharged cones score exactly 0."""
    return score_details(model, data).scores


def score_point(model: DamexModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise DataError(f"wrong dimension: expected {model.d} values, got {x.shape}")
    return float(score_batch(model, x[None, :])[0])


def is_extreme_batch(model: DamexModel, data) -> np.ndarray:
    V = transform_batch(model.marginals, data)
    return V.max(axis=1) >= model.radial_threshold


def is_extreme(model: DamexModel, x) -> bool:
    """True iff ``x`` lies beyond the radial threshold ``n/k`` on the Pareto scale."""
    return bool(is_extreme_batch(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def level_set_grid(model: DamexModel, x_values, y_values) -> np.ndarray:
    """Scores of a bivariate model on the grid ``x_values x y_values``.

    Entry ``[i, j]`` is the score at ``(x_values[j], y_values[i])``.
    """
    if model.d != 2:
        raise DataError(f"wrong dimension: level sets need d = 2, model has {model.d}")
    xx, yy = np.meshgrid(np.asarray(x_values, float), np.asarray(y_values, float))
    return score_batch(model, np.column_stack([xx.ravel(), yy.ravel()])).reshape(xx.shape)
