"""Per-objective Gaussian process regression over encoded designs.

Matern 5/2 kernel with per-dimension (ARD) lengthscales over the [0,1]
encoding. Targets are standardized before fitting so the default
hyperparameter bounds are scale-free; hyperparameters maximize the log
marginal likelihood via multi-restart L-BFGS-B with analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import ConditioningError, DimensionError, InsufficientDataError, ValidationError

SQRT5 = np.sqrt(5.0)

# log-space bounds on [0,1]-encoded inputs / standardized targets
LENGTHSCALE_BOUNDS = (1e-3, 10.0)
SIGNAL_BOUNDS = (1e-4, 1e2)
NOISE_BOUNDS = (1e-8, 1.0)
JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
NOISE_FLOOR = 1e-10
DEFAULT_RESTARTS = 5


@dataclass(frozen=True)
class GPHyperparams:
    lengthscales: tuple[float, ...]
    signal_variance: float
    noise_variance: float
    prior_mean: float  # constant mean in original target units


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass
class FittedGP:
    """Immutable after fit; safe for concurrent predict/sample calls."""

    hyperparams: GPHyperparams
    training_inputs: np.ndarray  # (n, d) encoded designs
    training_targets: np.ndarray  # (n,) standardized
    target_mean: float
    target_std: float
    degenerate: bool
    chol_lower: np.ndarray
    alpha: np.ndarray
    log_marginal_likelihood: float

    @property
    def dim(self) -> int:
        return self.training_inputs.shape[1]


# ---------------------------------------------------------------------------
# kernel


def _scaled_sq_dists(X1: np.ndarray, X2: np.ndarray, lengthscales: np.ndarray):
    """Per-dimension squared distances scaled by lengthscales: (n1, n2, d)."""
    diff = X1[:, None, :] - X2[None, :, :]
    return (diff / lengthscales[None, None, :]) ** 2


def matern52(
    X1: np.ndarray, X2: np.ndarray, lengthscales: np.ndarray, signal_variance: float
) -> np.ndarray:
    s = _scaled_sq_dists(X1, X2, lengthscales)
    r = np.sqrt(np.maximum(s.sum(axis=2), 0.0))
    return signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def _kernel_and_grads(X: np.ndarray, lengthscales, signal_variance):
    """Signal kernel matrix plus dK/d(log lengthscale_d) blocks."""
    s = _scaled_sq_dists(X, X, lengthscales)
    r2 = s.sum(axis=2)
    r = np.sqrt(np.maximum(r2, 0.0))
    expo = np.exp(-SQRT5 * r)
    K = signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * expo
    # d/d(log l_d) of the Matern 5/2 radial form
    common = signal_variance * (5.0 / 3.0) * (1.0 + SQRT5 * r) * expo
    grads = common[:, :, None] * s
    return K, grads


# ---------------------------------------------------------------------------
# marginal likelihood


def log_marginal_likelihood(
    X: np.ndarray,
    y: np.ndarray,
    lengthscales,
    signal_variance: float,
    noise_variance: float,
    jitter: float = JITTER_LADDER[0],
) -> tuple[float, np.ndarray]:
    """Value and gradient of the log marginal likelihood.

    The gradient is taken with respect to the log-space parameter vector
    [log lengthscales..., log signal_variance, log noise_variance].
    Returns (-inf, zeros) when the kernel matrix is not positive definite.
    """
    ls = np.asarray(lengthscales, dtype=float)
    n, d = X.shape
    K_signal, K_grads = _kernel_and_grads(X, ls, signal_variance)
    K = K_signal + (noise_variance + jitter) * np.eye(n)
    try:
        L = cholesky(K, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf, np.zeros(d + 2)
    alpha = cho_solve((L, True), y)
    lml = (
        -0.5 * float(y @ alpha)
        - float(np.log(np.diag(L)).sum())
        - 0.5 * n * np.log(2.0 * np.pi)
    )
    # 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
    K_inv = cho_solve((L, True), np.eye(n))
    inner = np.outer(alpha, alpha) - K_inv
    grad = np.empty(d + 2)
    for j in range(d):
        grad[j] = 0.5 * float((inner * K_grads[:, :, j]).sum())
    grad[d] = 0.5 * float((inner * K_signal).sum())
    grad[d + 1] = 0.5 * float(np.trace(inner)) * noise_variance
    return lml, grad


def _merge_duplicate_rows(X: np.ndarray, y: np.ndarray):
    """Average targets of identical encoded inputs (keeps K non-singular)."""
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    if uniq.shape[0] == X.shape[0]:
        return X, y
    sums = np.zeros(uniq.shape[0])
    counts = np.zeros(uniq.shape[0])
    np.add.at(sums, inverse, y)
    np.add.at(counts, inverse, 1.0)
    return uniq, sums / counts


def _chol_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    for jitter in JITTER_LADDER:
        try:
            return cholesky(K + jitter * np.eye(K.shape[0]), lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise ConditioningError(
        "kernel matrix not positive definite after jitter escalation"
    )


# ---------------------------------------------------------------------------
# fitting


def fit(
    X,
    y,
    seed: int = 0,
    noise: float | str = "fit",
    restarts: int = DEFAULT_RESTARTS,
) -> FittedGP:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    ``noise`` is either "fit" (noise variance optimized within bounds) or a
    fixed non-negative value, clamped up to the jitter floor. The best of
    ``restarts`` seeded log-space initializations is kept, so the reported
    likelihood never decreases as restarts are added.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValidationError("X must be an (n, d) matrix of encoded designs")
    if y.shape != (X.shape[0],):
        raise ValidationError("y must have one entry per row of X")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValidationError("non-finite values in training data")
    X, y = _merge_duplicate_rows(X, y)
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError(f"need at least 2 distinct observations, got {n}")

    target_mean = float(y.mean())
    target_std = float(y.std())
    degenerate = target_std < 1e-12
    if degenerate:
        target_std = 1.0
    y_std = (y - target_mean) / target_std

    fixed_noise = None if noise == "fit" else max(float(noise), NOISE_FLOOR)
    if fixed_noise is not None and fixed_noise < 0:
        raise ValidationError("noise variance must be non-negative")

    log_ls_bounds = np.log(LENGTHSCALE_BOUNDS)
    log_sig_bounds = np.log(SIGNAL_BOUNDS)
    log_noise_bounds = np.log(NOISE_BOUNDS)

    def objective(theta):
        ls = np.exp(theta[:d])
        sig = float(np.exp(theta[d]))
        nz = fixed_noise if fixed_noise is not None else float(np.exp(theta[d + 1]))
        lml, grad = log_marginal_likelihood(X, y_std, ls, sig, nz)
        if not np.isfinite(lml):
            return 1e25, np.zeros(theta.size)
        if fixed_noise is not None:
            grad = grad[:-1]
        return -lml, -grad

    bounds = [tuple(log_ls_bounds)] * d + [tuple(log_sig_bounds)]
    if fixed_noise is None:
        bounds.append(tuple(log_noise_bounds))

    rng = np.random.default_rng(seed)
    inits = [np.log(np.concatenate([np.full(d, 0.5), [1.0], [] if fixed_noise is not None else [1e-4]]))]
    for _ in range(max(restarts - 1, 0)):
        theta0 = np.array([rng.uniform(lo, hi) for lo, hi in bounds])
        inits.append(theta0)

    best_theta = None
    best_value = np.inf
    if not degenerate:
        for theta0 in inits:
            result = minimize(
                objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds
            )
            if result.fun < best_value:
                best_value = result.fun
                best_theta = result.x
    if best_theta is None:  # degenerate targets or universal failure
        best_theta = inits[0]
        best_value = objective(best_theta)[0]

    ls = np.exp(best_theta[:d])
    sig = float(np.exp(best_theta[d]))
    nz = fixed_noise if fixed_noise is not None else float(np.exp(best_theta[d + 1]))
    hyper = GPHyperparams(
        lengthscales=tuple(float(v) for v in ls),
        signal_variance=sig,
        noise_variance=nz,
        prior_mean=target_mean,
    )

    K = matern52(X, X, ls, sig) + nz * np.eye(n)
    L, _ = _chol_with_jitter(K)
    alpha = cho_solve((L, True), y_std)
    return FittedGP(
        hyperparams=hyper,
        training_inputs=X,
        training_targets=y_std,
        target_mean=target_mean,
        target_std=target_std,
        degenerate=degenerate,
        chol_lower=L,
        alpha=alpha,
        log_marginal_likelihood=-float(best_value),
    )


# ---------------------------------------------------------------------------
# prediction


def predict_batch(model: FittedGP, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance (original units) at each row of X.

    The variance is predictive (includes the fitted noise). Raw variances
    below -1e-8 indicate a numerical fault and raise; tiny negatives are
    clamped to zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dim:
        raise DimensionError(
            f"expected {model.dim}-dimensional inputs, got {X.shape[1]}"
        )
    h = model.hyperparams
    ls = np.asarray(h.lengthscales)
    k_star = matern52(X, model.training_inputs, ls, h.signal_variance)
    mean_std = k_star @ model.alpha
    v = solve_triangular(model.chol_lower, k_star.T, lower=True)
    var_std = h.signal_variance + h.noise_variance - np.einsum("ij,ij->j", v, v)
    if (var_std < -1e-8).any():
        raise ConditioningError(
            f"negative posterior variance {var_std.min():.3e}; kernel ill-conditioned"
        )
    var_std = np.maximum(var_std, 0.0)
    mean = model.target_mean + model.target_std * mean_std
    var = (model.target_std**2) * var_std
    return mean, var


def predict(model: FittedGP, x) -> Posterior:
    mean, var = predict_batch(model, np.asarray(x, dtype=float)[None, :])
    return Posterior(mean=float(mean[0]), variance=float(var[0]))


def sample_path(model: FittedGP, candidate_set, seed: int) -> np.ndarray:
    """One joint draw from the posterior over the candidate set.

    Deterministic given the seed. Samples the latent function (no
    observation noise) in original target units.
    """
    Xs = np.atleast_2d(np.asarray(candidate_set, dtype=float))
    if Xs.shape[0] == 0:
        raise ValidationError("candidate set must be non-empty")
    if Xs.shape[1] != model.dim:
        raise DimensionError(
            f"expected {model.dim}-dimensional candidates, got {Xs.shape[1]}"
        )
    h = model.hyperparams
    ls = np.asarray(h.lengthscales)
    k_star = matern52(Xs, model.training_inputs, ls, h.signal_variance)
    mean_std = k_star @ model.alpha
    v = solve_triangular(model.chol_lower, k_star.T, lower=True)
    cov = matern52(Xs, Xs, ls, h.signal_variance) - v.T @ v
    cov = 0.5 * (cov + cov.T)
    L, _ = _chol_with_jitter(cov)
    z = np.random.default_rng(seed).standard_normal(Xs.shape[0])
    sample_std = mean_std + L @ z
    return model.target_mean + model.target_std * sample_std


# ---------------------------------------------------------------------------
# serialization (structured-text family shared with the problem schema)


def gp_to_dict(model: FittedGP) -> dict[str, Any]:
    h = model.hyperparams
    return {
        "kernel": "matern52",
        "lengthscales": list(h.lengthscales),
        "signal_variance": h.signal_variance,
        "noise_variance": h.noise_variance,
        "prior_mean": h.prior_mean,
        "target_mean": model.target_mean,
        "target_std": model.target_std,
        "degenerate": model.degenerate,
        "log_marginal_likelihood": model.log_marginal_likelihood,
        "training_inputs": [list(map(float, row)) for row in model.training_inputs],
        "training_targets": [
            float(model.target_mean + model.target_std * t)
            for t in model.training_targets
        ],
    }


def gp_from_dict(doc: Mapping[str, Any]) -> FittedGP:
    """Rebuild a fitted model (factorization recomputed, no refit)."""
    X = np.asarray(doc["training_inputs"], dtype=float)
    y = np.asarray(doc["training_targets"], dtype=float)
    target_mean = float(doc["target_mean"])
    target_std = float(doc["target_std"])
    y_std = (y - target_mean) / target_std
    ls = np.asarray(doc["lengthscales"], dtype=float)
    sig = float(doc["signal_variance"])
    nz = float(doc["noise_variance"])
    K = matern52(X, X, ls, sig) + nz * np.eye(X.shape[0])
    L, _ = _chol_with_jitter(K)
    alpha = cho_solve((L, True), y_std)
    return FittedGP(
        hyperparams=GPHyperparams(
            lengthscales=tuple(float(v) for v in ls),
            signal_variance=sig,
            noise_variance=nz,
            prior_mean=float(doc["prior_mean"]),
        ),
        training_inputs=X,
        training_targets=y_std,
        target_mean=target_mean,
        target_std=target_std,
        degenerate=bool(doc.get("degenerate", False)),
        chol_lower=L,
        alpha=alpha,
        log_marginal_likelihood=float(doc.get("log_marginal_likelihood", np.nan)),
    )
