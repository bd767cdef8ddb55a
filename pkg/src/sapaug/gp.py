"""Gaussian-process surrogate on the unit cube with a squared-exponential ARD kernel.

Targets are standardized before fitting; ``predict`` returns moments in the
original target units. Kernel hyper-parameters are fitted by maximizing the
log marginal likelihood from several starting points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

from .errors import InputError, NumericalError

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

LENGTHSCALE_BOUNDS = (1e-2, 1e2)
SIGNAL_VAR_BOUNDS = (1e-2, 1e2)
NOISE_VAR_BOUNDS = (1e-10, 1.0)
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GpModel:
    X: np.ndarray  # (n, d) inputs in the unit cube
    y: np.ndarray  # (n,) raw targets
    y_mean: float
    y_std: float
    lengthscales: np.ndarray
    signal_var: float
    noise_var: float
    jitter: float
    chol: np.ndarray  # lower Cholesky factor of K + (noise + jitter) I
    alpha: np.ndarray  # (K + noise I)^-1 z, z the standardized targets

    @property
    def z(self) -> np.ndarray:
        return (self.y - self.y_mean) / self.y_std

    def predict(self, Xq, return_std: bool = True):
        """Posterior mean (and latent std) at ``Xq``, in target units."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
        Ks = se_kernel(Xq, self.X, self.lengthscales, self.signal_var)
        mean = Ks @ self.alpha * self.y_std + self.y_mean
        if not return_std:
            return mean
        v = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = np.maximum(self.signal_var - np.einsum("ij,ij->j", v, v), 0.0)
        return mean, np.sqrt(var) * self.y_std

    def condition_on(self, X_new, y_new) -> "GpModel":
        """Same hyper-parameters, more data. Used for constant-liar fantasies."""
        X = np.vstack([self.X, np.atleast_2d(X_new)])
        y = np.concatenate([self.y, np.atleast_1d(y_new).astype(np.float64)])
        return _build(X, y, self.y_mean, self.y_std, self.lengthscales, self.signal_var, self.noise_var)


def se_kernel(A, B, lengthscales, signal_var):
    As = A / lengthscales
    Bs = B / lengthscales
    sq = (
        np.sum(As * As, axis=1)[:, None]
        + np.sum(Bs * Bs, axis=1)[None, :]
        - 2.0 * As @ Bs.T
    )
    return signal_var * np.exp(-0.5 * np.maximum(sq, 0.0))


def _factor(K, noise_var):
    n = K.shape[0]
    last = None
    for jitter in JITTER_LADDER:
        try:
            L = cholesky(K + (noise_var + jitter) * np.eye(n), lower=True, check_finite=False)
            return L, jitter
        except LinAlgError as exc:
            last = exc
    raise NumericalError(
        f"covariance of {n} points not positive definite after jitter {JITTER_LADDER[-1]:g} "
        f"(noise_var={noise_var:g}, min diag={np.min(np.diag(K)):g}): {last}"
    )


def _build(X, y, y_mean, y_std, lengthscales, signal_var, noise_var) -> GpModel:
    z = (y - y_mean) / y_std
    K = se_kernel(X, X, lengthscales, signal_var)
    L, jitter = _factor(K, noise_var)
    alpha = cho_solve((L, True), z, check_finite=False)
    return GpModel(X, y, y_mean, y_std, np.asarray(lengthscales, dtype=np.float64),
                   float(signal_var), float(noise_var), jitter, L, alpha)


def neg_log_marginal_likelihood(theta, X, z):
    """Negative LML and its gradient w.r.t. ``theta = [log l_1..l_d, log s2, log noise]``."""
    d = X.shape[1]
    ls = np.exp(theta[:d])
    s2 = math.exp(theta[d])
    noise = math.exp(theta[d + 1])
    n = X.shape[0]
    K = se_kernel(X, X, ls, s2)
    try:
        L = cholesky(K + noise * np.eye(n), lower=True, check_finite=False)
    except LinAlgError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((L, True), z, check_finite=False)
    nll = 0.5 * z @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI
    Kinv = cho_solve((L, True), np.eye(n), check_finite=False)
    W = np.outer(alpha, alpha) - Kinv  # dLML/dK = W / 2
    grad = np.empty_like(theta)
    for k in range(d):
        diff = X[:, k][:, None] - X[:, k][None, :]
        grad[k] = -0.5 * np.sum(W * K * (diff * diff) / (ls[k] ** 2))
    grad[d] = -0.5 * np.sum(W * K)
    grad[d + 1] = -0.5 * noise * np.trace(W)
    return nll, grad


def fit_gp(X, y, rng=None, n_restarts: int = 4) -> GpModel:
    """Fit a GP to inputs ``X`` (unit cube) and raw targets ``y``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.size:
        raise InputError(f"need >= 1 matching inputs/targets, got X {X.shape}, y {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("targets must be finite")
    n, d = X.shape
    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if not y_std > 1e-12:
        y_std = 1.0
    z = (y - y_mean) / y_std

    log_bounds = (
        [tuple(map(math.log, LENGTHSCALE_BOUNDS))] * d
        + [tuple(map(math.log, SIGNAL_VAR_BOUNDS)), tuple(map(math.log, NOISE_VAR_BOUNDS))]
    )
    lo = np.array([b[0] for b in log_bounds])
    hi = np.array([b[1] for b in log_bounds])
    starts = [np.concatenate([np.full(d, math.log(0.3)), [0.0, math.log(1e-3)]])]
    if n > 1:
        rng = np.random.default_rng(rng)
        starts += [lo + (hi - lo) * rng.random(lo.size) for _ in range(n_restarts)]

    best_theta, best_val = starts[0], np.inf
    if n > 1:
        for theta0 in starts:
            res = minimize(neg_log_marginal_likelihood, theta0, args=(X, z), jac=True,
                           method="L-BFGS-B", bounds=log_bounds)
            if np.isfinite(res.fun) and res.fun < best_val:
                best_theta, best_val = res.x, res.fun
    theta = np.clip(best_theta, lo, hi)
    return _build(X, y, y_mean, y_std, np.exp(theta[:d]), math.exp(theta[d]), math.exp(theta[d + 1]))


def ei_from_moments(mean, std, best):
    """``E[max(0, f - best)]`` for ``f ~ N(mean, std^2)``; zero-variance limit handled."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    gap = mean - best
    # a subnormal std overflows u to +-inf, which gives the right limits below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = np.where(std > 0, gap / np.where(std > 0, std, 1.0), 0.0)
        pdf = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    ei = np.where(std > 0, gap * ndtr(u) + std * pdf, np.maximum(gap, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(model: GpModel, X, best: float):
    mean, std = model.predict(X)
    return ei_from_moments(mean, std, best)

