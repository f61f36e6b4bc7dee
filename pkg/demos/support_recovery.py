"""A reduced support-recovery table.

The full experiment (20 runs, n = 50000) takes about a minute per row on one
core; this version uses fewer runs so it finishes quickly.
"""
from damex import support_recovery_experiment

rows = support_recovery_experiment(d=10, K_values=(3, 10, 25, 50), n_values=(20_000,), runs=4, seed=0)
print(f"{'K':>4} {'n':>7} {'mean errors':>12} {'std':>6}")
for r in rows:
    print(f"{r.K:>4} {r.n:>7} {r.mean_errors:>12.2f} {r.std_errors:>6.2f}")
