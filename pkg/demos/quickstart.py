"""Fit a model on simulated data and score a few points.

Run with ``python3 demos/quickstart.py``.
"""
import numpy as np

from damex import DamexParams, FeatureSubset, LogisticSpec, fit_damex, sample_asymmetric_logistic, score_batch
from damex.cones import census

rng = np.random.default_rng(0)

# Five features. Extremes happen jointly in {1,2}, in {3,4,5}, and alone in {4}.
spec = LogisticSpec(5, (FeatureSubset.from_one_based([1, 2]),
                        FeatureSubset.from_one_based([3, 4, 5]),
                        FeatureSubset.from_one_based([4])))
train = sample_asymmetric_logistic(spec, 20_000, rng)

model = fit_damex(train, DamexParams(epsilon=0.1))
print(f"k = {model.k}, radial threshold n/k = {model.radial_threshold:.1f}")
for cone, mass in sorted(model.masses.items(), key=lambda kv: -kv[1]):
    print(f"  cone {cone}: mass {mass:.3f}")
print("mass by cone dimension:", census(model.masses))

# A joint extreme of features 1 and 2 is ordinary here. A joint extreme of
# 1 and 3 never happens in the training data, so it gets score 0.
q = np.quantile(train.values, 0.999, axis=0)
points = np.array([
    [q[0], q[1], 1.0, 1.0, 1.0],
    [q[0], 1.0, q[2], 1.0, 1.0],
])
print("scores (smaller is more abnormal):", score_batch(model, points))
