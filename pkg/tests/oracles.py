"""Independent reference implementations used as test oracles."""

import itertools

import numpy as np


def brute_force_cone_counts(V, k, epsilon):
    """Count points per epsilon-cone by testing every point against the
    definition of every non-empty subset, with no shared code paths."""
    V = np.asarray(V, dtype=float)
    n, d = V.shape
    counts = {}
    for row in V:
        norm = max(row)
        if not norm >= n / k:
            continue
        hits = []
        for size in range(1, d + 1):
            for alpha in itertools.combinations(range(d), size):
                inside = all(row[i] > epsilon * norm for i in alpha)
                outside = all(row[i] <= epsilon * norm for i in range(d) if i not in alpha)
                if inside and outside:
                    hits.append(alpha)
        assert len(hits) == 1, hits
        counts[hits[0]] = counts.get(hits[0], 0) + 1
    return counts


def naive_ecdf_transform(train, query):
    """1 / (1 - F) with F(x) = #{train <= x} / (n + 1), column by column."""
    train, query = np.asarray(train, float), np.asarray(query, float)
    n = len(train)
    out = np.empty(query.shape)
    for i, row in enumerate(query):
        for j, x in enumerate(row):
            F = sum(1 for t in train[:, j] if t <= x) / (n + 1)
            out[i, j] = 1.0 / (1.0 - F)
    return out
