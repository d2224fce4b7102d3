"""Dominance relations, non-dominated sorting, crowding and hypervolume.

All functions use the minimization convention: smaller is better in every
objective. Exact hypervolume covers 2 and 3 objectives; higher dimensions
fall back to a seeded Monte Carlo estimate with a reported standard error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, ValidationError

MC_SAMPLES_DEFAULT = 100_000


@dataclass(frozen=True)
class FrontPartition:
    """Ordered dominance fronts over the input indices (front 0 first)."""

    fronts: tuple[tuple[int, ...], ...]

    def rank_of(self) -> dict[int, int]:
        return {i: k for k, front in enumerate(self.fronts) for i in front}


def _as_points(points, name="points") -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValidationError(f"{name}: expected a non-empty (n, m) array")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name}: entries must be finite")
    return arr


def dominates(a, b) -> bool:
    """True iff a is no worse than b everywhere and strictly better once."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return bool((a <= b).all() and (a < b).any())


def non_dominated_sort(points) -> FrontPartition:
    """Partition points into dominance fronts (front 0 = non-dominated).

    Output order within each front follows input order.
    """
    arr = _as_points(points)
    fronts = _kernels.non_dominated_sort(np.ascontiguousarray(arr))
    return FrontPartition(tuple(tuple(int(i) for i in f) for f in fronts))


def non_dominated_indices(points) -> np.ndarray:
    """Indices of the non-dominated subset (front 0), input order."""
    arr = _as_points(points)
    return np.asarray(_kernels.non_dominated_sort(np.ascontiguousarray(arr))[0])


def crowding_distance(front) -> np.ndarray:
    """Diversity score per point of one mutually non-dominated front.

    Boundary points (min or max in any objective) get +inf; interior points
    get the sum of normalized neighbour gaps. Fewer than 3 points are all
    boundary, hence all +inf. Zero-range objectives contribute 0.
    """
    arr = _as_points(front, "front")
    return _kernels.crowding_distance(np.ascontiguousarray(arr))


def _check_ref(arr: np.ndarray, ref: np.ndarray) -> None:
    if ref.shape != (arr.shape[1],):
        raise DimensionError(
            f"reference point length {ref.shape} != objective count {arr.shape[1]}"
        )
    worse = arr > ref[None, :]
    if worse.any():
        i = int(np.argwhere(worse.any(axis=1))[0][0])
        raise ValidationError(
            f"point {i} is worse than the reference point in some dimension"
        )


def hypervolume_monte_carlo(
    points, ref, n_samples: int = MC_SAMPLES_DEFAULT, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo hypervolume estimate and its standard error.

    Samples uniformly in the box spanned by the componentwise minimum of
    the points and the reference point, counting dominated samples.
    """
    arr = _as_points(points)
    ref = np.asarray(ref, dtype=float)
    _check_ref(arr, ref)
    lo = arr.min(axis=0)
    box = float(np.prod(ref - lo))
    if box == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 100_000
    done = 0
    while done < n_samples:
        take = min(chunk, n_samples - done)
        samples = rng.uniform(lo, ref, size=(take, arr.shape[1]))
        dominated = (arr[None, :, :] <= samples[:, None, :]).all(axis=2).any(axis=1)
        hits += int(dominated.sum())
        done += take
    p = hits / n_samples
    estimate = box * p
    stderr = box * float(np.sqrt(max(p * (1.0 - p), 0.0) / n_samples))
    return estimate, stderr


def hypervolume_with_error(
    points, ref, n_samples: int = MC_SAMPLES_DEFAULT, seed: int = 0
) -> tuple[float, float]:
    """Hypervolume plus standard error (0 for the exact 2-/3-objective paths)."""
    arr = _as_points(points)
    ref = np.asarray(ref, dtype=float)
    _check_ref(arr, ref)
    m = arr.shape[1]
    if m == 1:
        return float(ref[0] - arr.min()), 0.0
    if m == 2:
        return float(_kernels.hypervolume_2d(np.ascontiguousarray(arr), ref)), 0.0
    if m == 3:
        return float(_kernels.hypervolume_3d(np.ascontiguousarray(arr), ref)), 0.0
    return hypervolume_monte_carlo(arr, ref, n_samples=n_samples, seed=seed)


def hypervolume(
    points, ref, n_samples: int = MC_SAMPLES_DEFAULT, seed: int = 0
) -> float:
    """Measure of the union of boxes [point, ref] over the given points."""
    return hypervolume_with_error(points, ref, n_samples=n_samples, seed=seed)[0]


def reference_point(points, margin: float = 0.1) -> np.ndarray:
    """Strictly-worse corner for hypervolume: per-objective max of the
    observed values plus ``margin`` times the observed range (degenerate
    ranges fall back to a unit margin)."""
    arr = _as_points(points)
    hi = arr.max(axis=0)
    span = hi - arr.min(axis=0)
    span[span <= 0.0] = 1.0
    return hi + margin * span
