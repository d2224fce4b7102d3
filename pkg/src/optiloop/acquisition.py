"""Acquisition functions scored on the surrogate posterior.

Everything follows the internal minimization convention: smaller posterior
values are better, so improvement means dropping below the incumbent and
the confidence-bound variant subtracts the exploration bonus.

Vector-valued acquisitions return one score per objective; the augmented
Tchebycheff scalarization collapses an m-vector to a single cost for the
weight-rotation strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .errors import DimensionError, ValidationError
from .surrogate import FittedGP, Posterior, predict_batch, sample_path

ACQUISITION_KINDS = (
    "expected_improvement",
    "upper_confidence_bound",
    "thompson_sampling",
    "posterior_mean",
)

DEFAULT_UCB_BETA = 2.0
DEFAULT_RHO = 0.05  # augmentation coefficient of the Tchebycheff scalarization
TS_GRID_SIZE = 1024


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str
    ucb_beta: float | None = None
    ts_seed: int | None = None

    def __post_init__(self):
        if self.kind not in ACQUISITION_KINDS:
            raise ValidationError(f"unknown acquisition kind {self.kind!r}")
        if self.kind == "upper_confidence_bound":
            beta = self.ucb_beta if self.ucb_beta is not None else DEFAULT_UCB_BETA
            if beta <= 0:
                raise ValidationError("ucb_beta must be positive")
            object.__setattr__(self, "ucb_beta", beta)
        elif self.ucb_beta is not None:
            raise ValidationError("ucb_beta only applies to upper_confidence_bound")
        if self.kind == "thompson_sampling":
            object.__setattr__(
                self, "ts_seed", self.ts_seed if self.ts_seed is not None else 0
            )
        elif self.ts_seed is not None:
            raise ValidationError("ts_seed only applies to thompson_sampling")


@dataclass(frozen=True)
class ScalarizationWeights:
    w: tuple[float, ...]
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError("weights must be non-negative and sum to 1")
        if self.rho <= 0:
            raise ValidationError("rho must be positive")


def simplex_weights(m: int, seed: int, rho: float = DEFAULT_RHO) -> ScalarizationWeights:
    """Uniform draw from the m-simplex (exponential-spacing construction)."""
    rng = np.random.default_rng(seed)
    raw = rng.exponential(size=m)
    return ScalarizationWeights(w=tuple(raw / raw.sum()), rho=rho)


# ---------------------------------------------------------------------------
# scalar acquisitions


def expected_improvement(post: Posterior, best: float) -> float:
    """E[max(best - Y, 0)] for Y ~ N(mean, variance); always >= 0."""
    if not (np.isfinite(post.mean) and np.isfinite(post.variance)):
        raise ValidationError("non-finite posterior")
    sigma = post.std
    if sigma == 0.0:
        return max(best - post.mean, 0.0)
    z = (best - post.mean) / sigma
    return float(sigma * (z * norm.cdf(z) + norm.pdf(z)))


def ucb(post: Posterior, beta: float) -> float:
    """Optimistic bound under minimization: mean - sqrt(beta) * std."""
    if beta <= 0:
        raise ValidationError("beta must be positive")
    return float(post.mean - np.sqrt(beta) * post.std)


def tchebycheff(y: Sequence[float], weights: ScalarizationWeights) -> float:
    """Augmented Tchebycheff cost: max_i(w_i y_i) + rho * sum_i(w_i y_i)."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights.w)
    if y.shape != w.shape:
        raise DimensionError(f"length mismatch: {y.shape} vs {w.shape}")
    wy = w * y
    return float(wy.max() + weights.rho * wy.sum())


def normalize_objectives(Y: np.ndarray) -> np.ndarray:
    """Min-max normalize each objective over observed data.

    Degenerate ranges (max == min) map to 0 so they cannot steer the
    scalarization.
    """
    Y = np.asarray(Y, dtype=float)
    lo = Y.min(axis=0)
    hi = Y.max(axis=0)
    span = hi - lo
    out = np.zeros_like(Y)
    ok = span > 0
    out[:, ok] = (Y[:, ok] - lo[ok]) / span[ok]
    return out


# ---------------------------------------------------------------------------
# evaluation over batches of encoded designs


@dataclass
class ThompsonSample:
    """A joint posterior draw frozen on a fixed candidate grid.

    Scoring an arbitrary point looks up its nearest grid point, which keeps
    the sample a deterministic function of (models, grid, seed).
    """

    grid: np.ndarray  # (g, d)
    values: np.ndarray  # (g, m)

    def lookup(self, X: np.ndarray) -> np.ndarray:
        d2 = ((X[:, None, :] - self.grid[None, :, :]) ** 2).sum(axis=2)
        return self.values[np.argmin(d2, axis=1)]


def draw_thompson_sample(
    models: Sequence[FittedGP], dim: int, seed: int, grid_size: int = TS_GRID_SIZE
) -> ThompsonSample:
    rng = np.random.default_rng(seed)
    grid = rng.uniform(0.0, 1.0, size=(grid_size, dim))
    values = np.column_stack(
        [
            sample_path(model, grid, seed=int(rng.integers(2**31)))
            for model in models
        ]
    )
    return ThompsonSample(grid=grid, values=values)


@dataclass
class AcquisitionContext:
    """Per-iteration state the acquisition kinds need.

    incumbent_best: best observed value per objective (minimization).
    thompson: the frozen posterior draw for thompson_sampling.
    Sharing one context across threads is safe because it is read-only
    after construction.
    """

    incumbent_best: np.ndarray | None = None
    thompson: ThompsonSample | None = None
    extras: dict = field(default_factory=dict)


def evaluate_acquisition(
    spec: AcquisitionSpec,
    models: Sequence[FittedGP],
    X: np.ndarray,
    context: AcquisitionContext,
) -> np.ndarray:
    """Score a batch of encoded designs: (n, m) values, smaller is better.

    Expected improvement is negated so that every kind shares the
    minimization convention.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.kind == "posterior_mean":
        return np.column_stack([predict_batch(model, X)[0] for model in models])
    if spec.kind == "upper_confidence_bound":
        cols = []
        for model in models:
            mean, var = predict_batch(model, X)
            cols.append(mean - np.sqrt(spec.ucb_beta) * np.sqrt(var))
        return np.column_stack(cols)
    if spec.kind == "expected_improvement":
        if context.incumbent_best is None:
            raise ValidationError("expected_improvement needs incumbent_best")
        best = np.asarray(context.incumbent_best, dtype=float)
        if best.shape != (len(models),):
            raise ValidationError("incumbent_best must have one entry per objective")
        cols = []
        for j, model in enumerate(models):
            mean, var = predict_batch(model, X)
            sigma = np.sqrt(var)
            improvement = best[j] - mean
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(sigma > 0, improvement / sigma, 0.0)
            ei = np.where(
                sigma > 0,
                sigma * (z * norm.cdf(z) + norm.pdf(z)),
                np.maximum(improvement, 0.0),
            )
            cols.append(-ei)
        return np.column_stack(cols)
    if spec.kind == "thompson_sampling":
        if context.thompson is None:
            raise ValidationError("thompson_sampling needs a drawn sample in context")
        return context.thompson.lookup(X)
    raise ValidationError(f"unknown acquisition kind {spec.kind!r}")
