"""Latin hypercube designs with a maximin improvement pass."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist

from .errors import InvalidArgumentError


def lhs(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random Latin hypercube on ``[0, 1]^d``: one point per bin in every column."""
    cols = [rng.permutation(n) for _ in range(d)]
    bins = np.column_stack(cols).astype(float)
    return (bins + rng.uniform(size=(n, d))) / n


def min_distance(X: np.ndarray) -> float:
    return float(np.min(pdist(X))) if X.shape[0] > 1 else float("inf")


def lhs_maximin(n: int, d: int, seed: int, iters: int = 1000, lower=0.0, upper=1.0) -> np.ndarray:
    """Latin hypercube improved by column swaps that never decrease the minimum distance.

    Each iteration swaps two entries of one random column; the swap is kept
    when the smallest pairwise distance does not go down.  Swaps preserve the
    Latin property.
    """
    if n < 2:
        raise InvalidArgumentError("lhs_maximin needs n >= 2")
    if d < 1:
        raise InvalidArgumentError("lhs_maximin needs d >= 1")
    if iters < 0:
        raise InvalidArgumentError("iters must be >= 0")
    rng = np.random.default_rng(seed)
    X = lhs(n, d, rng)
    best = min_distance(X)
    for _ in range(iters):
        j = rng.integers(d)
        a, b = rng.choice(n, size=2, replace=False)
        X[[a, b], j] = X[[b, a], j]
        cand = min_distance(X)
        if cand >= best:
            best = cand
        else:
            X[[a, b], j] = X[[b, a], j]
    lo, hi = np.broadcast_to(lower, (d,)), np.broadcast_to(upper, (d,))
    return lo + X * (hi - lo)


def is_latin(X: np.ndarray, lower=0.0, upper=1.0) -> bool:
    """Every 1-D projection hits each of the ``n`` equal bins exactly once."""
    n, d = X.shape
    U = (X - lower) / (np.asarray(upper) - lower)
    bins = np.minimum(np.floor(U * n).astype(int), n - 1)
    return all(np.array_equal(np.sort(bins[:, j]), np.arange(n)) for j in range(d))
