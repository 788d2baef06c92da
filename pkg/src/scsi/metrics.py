"""Distribution distances between sample sets.

w2sq_exact solves the optimal assignment on the squared-distance matrix and
reports the mean pairing cost, which is the squared Wasserstein-2 distance
between the two empirical measures. w2_sliced averages exact 1-D squared
distances over random projection directions and scales to larger or
unequally-sized sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

__all__ = ["SampleSet", "w2sq_exact", "w2_sliced", "cluster_count"]

_MAX_EXACT = 4096


@dataclass(frozen=True)
class SampleSet:
    """n points in d dimensions with an optional label."""

    points: np.ndarray
    label: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _as_set(a) -> SampleSet:
    return a if isinstance(a, SampleSet) else SampleSet(points=np.asarray(a, dtype=float))


def w2sq_exact(a, b) -> float:
    """Mean squared cost of the optimal pairing between two equal-size sets.

    Cubic worst case in n, so n is capped at 4096.
    """
    a, b = _as_set(a), _as_set(b)
    if a.n != b.n:
        raise ValueError(f"sets must have equal sizes, got {a.n} and {b.n}")
    if a.dim != b.dim:
        raise ValueError(f"sets must share a dimension, got {a.dim} and {b.dim}")
    if a.n > _MAX_EXACT:
        raise ValueError(f"exact assignment capped at {_MAX_EXACT} points, got {a.n}")
    cost = cdist(a.points, b.points, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def _w2sq_1d(u: np.ndarray, v: np.ndarray) -> float:
    """Exact squared W2 between 1-D empirical measures of any sizes, via the
    piecewise-constant quantile functions merged at their breakpoints."""
    u = np.sort(u)
    v = np.sort(v)
    n, m = len(u), len(v)
    if n == m:
        d = u - v
        return float(np.mean(d * d))
    # merge the jump locations {i/n} and {j/m} of both quantile functions
    edges = np.union1d(np.arange(n + 1) / n, np.arange(m + 1) / m)
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    qu = u[np.minimum((mids * n).astype(int), n - 1)]
    qv = v[np.minimum((mids * m).astype(int), m - 1)]
    return float(np.sum(widths * (qu - qv) ** 2))


def w2_sliced(a, b, n_projections: int = 128, rng: np.random.Generator | None = None) -> float:
    """Average of exact 1-D squared W2 over random unit projection directions."""
    a, b = _as_set(a), _as_set(b)
    if a.dim != b.dim:
        raise ValueError(f"sets must share a dimension, got {a.dim} and {b.dim}")
    if n_projections < 1:
        raise ValueError("n_projections must be >= 1")
    if a.dim == 1:
        return _w2sq_1d(a.points[:, 0], b.points[:, 0])
    rng = rng if rng is not None else np.random.default_rng(0)
    total = 0.0
    for _ in range(n_projections):
        u = rng.standard_normal(a.dim)
        u /= np.linalg.norm(u)
        total += _w2sq_1d(a.points @ u, b.points @ u)
    return total / n_projections


def cluster_count(points: np.ndarray, radius: float) -> int:
    """Number of single-linkage clusters at the given merge radius.

    Union-find over all pairs closer than `radius`; quadratic, intended for
    a few thousand points.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    d2 = cdist(pts, pts, metric="sqeuclidean")
    r2 = radius * radius
    rows, cols = np.nonzero(d2 < r2)
    for i, j in zip(rows, cols):
        if i < j:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
    return len({find(i) for i in range(n)})
