"""Score level sets of a bivariate model whose extremes sit on the axes.

Prints a coarse text picture of the score surface: blank cells are
non-extreme, '#' marks extreme cells whose direction is never seen in
training (score 0), and digits grade the remaining extreme scores.
"""
import numpy as np

from damex import DamexParams, fit_damex, level_set_grid
from damex.scoring import is_extreme_batch
from damex.simulation import two_d_benchmark

train, test = two_d_benchmark(rng=1)
model = fit_damex(train, DamexParams(epsilon=0.1))
print("charged cones:", ", ".join(str(c) for c in model.masses))

xs = ys = np.linspace(0.0, 300.0, 60)
grid = level_set_grid(model, xs, ys)
xx, yy = np.meshgrid(xs, ys)
extreme = is_extreme_batch(model, np.column_stack([xx.ravel(), yy.ravel()])).reshape(grid.shape)

positive = grid[grid > 0]
edges = np.quantile(positive, np.linspace(0, 1, 10)[1:-1]) if positive.size else []
for i in range(len(ys) - 1, -1, -2):
    row = []
    for j in range(len(xs)):
        if not extreme[i, j]:
            row.append(" ")
        elif grid[i, j] == 0:
            row.append("#")
        else:
            row.append(str(int(np.searchsorted(edges, grid[i, j]))))
    print("".join(row))
