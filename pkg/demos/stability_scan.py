"""Pick k and epsilon by looking for a region where the charged set stops moving."""
import numpy as np

from damex import LogisticSpec, random_support, sample_asymmetric_logistic, stability_scan
from damex.evaluation import power_grid

rng = np.random.default_rng(3)
support = random_support(8, 6, rng)
data = sample_asymmetric_logistic(LogisticSpec(8, tuple(support)), 20_000, rng)
print("planted:", ", ".join(str(s) for s in support))

report = stability_scan(data, power_grid(data.n, num=6), [0.01, 0.05, 0.1, 0.2])
print(f"{'k':>5} {'eps':>5} {'cones':>6} {'J(k-1)':>7} {'J(eps-1)':>8}")
for k, eps, n_charged, jk, je in report.rows():
    print(f"{k:>5} {eps:>5.2f} {n_charged:>6} {jk:>7.2f} {je:>8.2f}")
print("recommended (k, epsilon):", report.recommended)
if report.recommended:
    found = report.charged[report.recommended]
    print("recovered planted support:", found == frozenset(support))
