"""Pure NumPy implementations of the Pareto hot kernels.

Used when the compiled extension is unavailable (or forced via the
OPTILOOP_PURE_PYTHON environment variable). Semantics are identical to
optiloop._kernels._pareto_cy; both are exercised by the test suite and
compared by benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import numpy as np


def non_dominated_sort(values: np.ndarray) -> list[np.ndarray]:
    """Partition row indices of an (n, m) array into dominance fronts.

    Front 0 holds the non-dominated rows; each later front is dominated
    only by earlier ones. Indices within a front keep input order.
    """
    n = values.shape[0]
    # dominates[i, j]: row i weakly better everywhere and strictly somewhere
    le = (values[:, None, :] <= values[None, :, :]).all(axis=2)
    lt = (values[:, None, :] < values[None, :, :]).any(axis=2)
    dom = le & lt

    count = dom.sum(axis=0)  # how many rows dominate j
    fronts: list[np.ndarray] = []
    remaining = np.ones(n, dtype=bool)
    while remaining.any():
        current = np.flatnonzero(remaining & (count == 0))
        fronts.append(current)
        remaining[current] = False
        # removing the current front releases the rows it dominated
        count = count - dom[current].sum(axis=0)
    return fronts


def _objective_order(values: np.ndarray, j: int) -> np.ndarray:
    """Sort order for objective j, ties broken by the remaining columns.

    The full-row tiebreak keeps boundary assignment independent of input
    order for distinct rows (permutation equivariance).
    """
    m = values.shape[1]
    minor = [values[:, k] for k in range(m - 1, -1, -1) if k != j]
    return np.lexsort(tuple(minor) + (values[:, j],))


def crowding_distance(values: np.ndarray) -> np.ndarray:
    """Per-row diversity score within one mutually non-dominated front.

    The two boundary rows of each objective's sort get +inf; interior
    rows accumulate the normalized gap between their sorted neighbours.
    Objectives with zero range contribute nothing.
    """
    n, m = values.shape
    dist = np.zeros(n)
    if n < 3:
        dist[:] = np.inf
        return dist
    for j in range(m):
        col = values[:, j]
        span = col.max() - col.min()
        if span <= 0.0:
            continue
        order = _objective_order(values, j)
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        gaps = (col[order[2:]] - col[order[:-2]]) / span
        dist[order[1:-1]] += gaps
    return dist


def hypervolume_2d(values: np.ndarray, ref: np.ndarray) -> float:
    """Exact bi-objective hypervolume by a sorted sweep.

    Assumes every row weakly dominates ref (checked by the caller).
    """
    order = np.lexsort((values[:, 1], values[:, 0]))
    hv = 0.0
    prev_y = ref[1]
    for i in order:
        x, y = values[i, 0], values[i, 1]
        if y < prev_y:
            hv += (ref[0] - x) * (prev_y - y)
            prev_y = y
    return hv


def hypervolume_3d(values: np.ndarray, ref: np.ndarray) -> float:
    """Exact tri-objective hypervolume by slicing along the third axis."""
    z = values[:, 2]
    levels = np.unique(z)
    hv = 0.0
    uppers = np.append(levels[1:], ref[2])
    for level, upper in zip(levels, uppers):
        height = upper - level
        if height <= 0.0:
            continue
        active = values[z <= level, :2]
        hv += hypervolume_2d(active, ref[:2]) * height
    return hv
