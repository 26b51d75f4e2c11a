"""Gaussian-process regression with per-observation noise variances.

The same model type is used for the objective, the constraint and the noise
variance. Everything is RBF with a constant prior mean::

    k(x, x') = lambda^-1 * sigma_n^2 * exp(-0.5 * sum_d ((x_d - x'_d) / l_d)^2)

Observation noise enters as the diagonal ``Sigma`` of ``K + Sigma``; there is
no separate likelihood object.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from ._kernels import rbf_cross, rbf_gram

__all__ = [
    "GpNumericalError",
    "HyperparameterWarning",
    "KernelConfig",
    "TrainingSet",
    "GpModel",
    "rbf_kernel",
    "fit",
    "predict_mean",
    "predict_var",
    "confidence_bounds",
    "posterior_mean_gradient",
    "nlml",
    "tune_hyperparameters",
]

_LOG_2PI = math.log(2.0 * math.pi)
_JITTER_START = 1e-10
_JITTER_MAX = 1e-4
_CHUNK = 20_000


class GpNumericalError(ArithmeticError):
    """Raised when ``K + Sigma`` cannot be factorized even with jitter."""


class HyperparameterWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KernelConfig:
    """RBF kernel hyperparameters and constant prior mean.

    ``prior_scale`` is the lambda in ``GP(mu0, lambda^-1 k)``; ``0`` means no
    scaling.
    """

    signal_std: float
    lengthscales: tuple[float, ...]
    prior_mean: float = 0.0
    prior_scale: float = 1.0

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        if not self.signal_std > 0:
            raise ValueError(f"signal_std must be > 0, got {self.signal_std}")
        if not ls or any(not v > 0 for v in ls):
            raise ValueError(f"lengthscales must be > 0, got {ls}")
        if not self.prior_scale >= 0:
            raise ValueError(f"prior_scale must be >= 0, got {self.prior_scale}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    @property
    def prior_variance(self) -> float:
        """Prior variance ``lambda^-1 sigma_n^2`` at any input."""
        scale = 1.0 if self.prior_scale == 0 else 1.0 / self.prior_scale
        return scale * self.signal_std**2

    def covariance(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        inv_ls = 1.0 / np.asarray(self.lengthscales)
        return rbf_cross(
            np.ascontiguousarray(X1, dtype=float),
            np.ascontiguousarray(X2, dtype=float),
            inv_ls,
            self.prior_variance,
        )

    def gram(self, X: np.ndarray) -> np.ndarray:
        """``covariance(X, X)`` using symmetry."""
        inv_ls = 1.0 / np.asarray(self.lengthscales)
        return rbf_gram(np.ascontiguousarray(X, dtype=float), inv_ls, self.prior_variance)


@dataclass(frozen=True)
class TrainingSet:
    X: np.ndarray
    y: np.ndarray
    noise_vars: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if X.size else X.reshape(0, 1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        nv = np.broadcast_to(np.asarray(self.noise_vars, dtype=float), y.shape).copy()
        if not (X.shape[0] == y.shape[0] == nv.shape[0]):
            raise ValueError(
                f"inputs/targets/noise_vars lengths differ: {X.shape[0]}, {y.shape[0]}, {nv.shape[0]}"
            )
        if not np.all(np.isfinite(nv)) or np.any(nv < 0):
            raise ValueError("noise_vars must be finite and non-negative")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("inputs and targets must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise_vars", nv)

    @classmethod
    def empty(cls, dim: int) -> "TrainingSet":
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return self.y.shape[0]


def _as_points(x, dim: int) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1) if X.shape[0] == dim else X.reshape(-1, 1)
    if X.shape[1] != dim:
        raise ValueError(f"expected inputs of dimension {dim}, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs must be finite")
    return X


def _factorize(K: np.ndarray, prior_var: float):
    """Cholesky of an SPD matrix, escalating diagonal jitter on failure.

    A factor whose smallest pivot is below ``1e-10 * prior_var`` counts as a
    failure too, so near-duplicate noiseless points still get jitter.
    """
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    floor = _JITTER_START * prior_var
    try:
        L = cholesky(K, lower=True, check_finite=False)
        if np.min(np.diag(L)) ** 2 >= floor:
            return L, 0.0
    except LinAlgError:
        pass
    jitter = _JITTER_START
    while jitter <= _JITTER_MAX * (1 + 1e-9):
        try:
            L = cholesky(K + jitter * prior_var * np.eye(n), lower=True, check_finite=False)
            return L, jitter * prior_var
        except LinAlgError:
            jitter *= 10.0
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(K)
    raise GpNumericalError(
        f"K + Sigma not positive definite after jitter {_JITTER_MAX:g}*prior_var "
        f"(n={n}, cond={cond:.3e}, min diag={np.min(np.diag(K)):.3e})"
    )


@dataclass(frozen=True)
class GpModel:
    """Fitted posterior. Immutable; use :func:`fit` to construct."""

    config: KernelConfig
    train: TrainingSet
    chol: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.config.dim

    def mean(self, x) -> np.ndarray:
        X = _as_points(x, self.dim)
        mu0 = self.config.prior_mean
        if len(self.train) == 0:
            return np.full(X.shape[0], mu0)
        return mu0 + self.config.covariance(X, self.train.X) @ self.weights

    def var(self, x) -> np.ndarray:
        return self.predict(x)[1]

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at each row of ``x``."""
        X = _as_points(x, self.dim)
        prior = self.config.prior_variance
        mu0 = self.config.prior_mean
        if len(self.train) == 0:
            return np.full(X.shape[0], mu0), np.full(X.shape[0], prior)
        mean = np.empty(X.shape[0])
        var = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            Ks = self.config.covariance(X[sl], self.train.X)
            mean[sl] = mu0 + Ks @ self.weights
            V = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
            var[sl] = prior - np.einsum("ij,ij->j", V, V)
        return mean, np.maximum(var, 0.0)

    def bounds(self, x, beta: float) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised ``(lcb, ucb)``."""
        mean, var = self.predict(x)
        half = beta * np.sqrt(var)
        return mean - half, mean + half

    def mean_gradient(self, x) -> np.ndarray:
        """Analytic gradient of the posterior mean, shape ``(m, d)``."""
        X = _as_points(x, self.dim)
        if len(self.train) == 0:
            return np.zeros_like(X)
        Ks = self.config.covariance(X, self.train.X)  # (m, n)
        inv_l2 = 1.0 / np.asarray(self.config.lengthscales) ** 2
        kw = Ks * self.weights[None, :]
        # d/dx k(x, x_i) = -k(x, x_i) (x - x_i) / l^2
        return -(kw.sum(axis=1)[:, None] * X - kw @ self.train.X) * inv_l2[None, :]


def rbf_kernel(x, x2, cfg: KernelConfig) -> float:
    """RBF covariance ``sigma_n^2 exp(-0.5 |(x - x') / l|^2)`` without the lambda scaling."""
    a = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    if a.shape != (cfg.dim,) or b.shape != (cfg.dim,):
        raise ValueError(
            f"dimension mismatch: {a.shape}, {b.shape} vs {cfg.dim} lengthscales"
        )
    z = (a - b) / np.asarray(cfg.lengthscales)
    return float(cfg.signal_std**2 * math.exp(-0.5 * float(z @ z)))


def fit(train: TrainingSet, cfg: KernelConfig) -> GpModel:
    if len(train) and train.X.shape[1] != cfg.dim:
        raise ValueError(f"training inputs have dimension {train.X.shape[1]}, kernel {cfg.dim}")
    n = len(train)
    if n == 0:
        return GpModel(cfg, train, np.zeros((0, 0)), np.zeros(0))
    K = cfg.gram(train.X)
    K[np.diag_indices(n)] += train.noise_vars
    L, jitter = _factorize(K, cfg.prior_variance)
    weights = cho_solve((L, True), train.y - cfg.prior_mean, check_finite=False)
    return GpModel(cfg, train, L, weights, jitter)


def predict_mean(model: GpModel, x) -> float:
    return float(model.mean(x)[0])


def predict_var(model: GpModel, x) -> float:
    return float(model.predict(x)[1][0])


def confidence_bounds(model: GpModel, x, beta: float) -> tuple[float, float]:
    if beta < 0:
        raise ValueError("beta must be non-negative")
    lcb, ucb = model.bounds(x, beta)
    return float(lcb[0]), float(ucb[0])


def posterior_mean_gradient(model: GpModel, x) -> np.ndarray:
    return model.mean_gradient(x)[0]


def nlml(train: TrainingSet, cfg: KernelConfig) -> float:
    """Negative log marginal likelihood of ``train`` under ``cfg``."""
    n = len(train)
    if n < 1:
        raise ValueError("nlml needs at least one observation")
    model = fit(train, cfg)
    r = train.y - cfg.prior_mean
    return float(
        0.5 * r @ model.weights
        + np.sum(np.log(np.diag(model.chol)))
        + 0.5 * n * _LOG_2PI
    )


def _with_params(cfg: KernelConfig, theta: np.ndarray) -> KernelConfig:
    return replace(cfg, signal_std=float(theta[0]), lengthscales=tuple(float(v) for v in theta[1:]))


def _coordinate_search(f, z0, lo, hi, step, tol, max_evals):
    z = z0.copy()
    fz = f(z)
    evals = 1
    while step > tol and evals < max_evals:
        improved = False
        for i in range(z.size):
            for direction in (1.0, -1.0):
                cand = z.copy()
                cand[i] = min(max(cand[i] + direction * step, lo[i]), hi[i])
                if cand[i] == z[i]:
                    continue
                fc = f(cand)
                evals += 1
                if fc < fz:
                    z, fz, improved = cand, fc, True
                    break
        if not improved:
            step *= 0.5
    return z, fz


def tune_hyperparameters(
    train: TrainingSet,
    bounds: Sequence[Sequence[float]],
    cfg0: KernelConfig,
    n_starts: int = 8,
    seed: int = 0,
    tol: float = 1e-3,
    max_evals: int = 200,
) -> KernelConfig:
    """Minimise :func:`nlml` over ``(signal_std, lengthscales...)``.

    ``bounds`` is a ``(1 + d, 2)`` box in natural units. The search is a
    multi-start coordinate search in log space; the first start is ``cfg0``
    projected into the box, the rest are drawn from a fixed-seed uniform
    design. The prior mean and prior scale are never touched. The result is
    never worse than the projected ``cfg0``.
    """
    box = np.asarray(bounds, dtype=float)
    if box.shape != (1 + cfg0.dim, 2):
        raise ValueError(f"bounds must have shape {(1 + cfg0.dim, 2)}, got {box.shape}")
    if np.any(box[:, 0] <= 0) or np.any(box[:, 1] < box[:, 0]):
        raise ValueError("bounds must be positive with lower <= upper")
    lo, hi = np.log(box[:, 0]), np.log(box[:, 1])
    theta0 = np.clip(np.r_[cfg0.signal_std, cfg0.lengthscales], box[:, 0], box[:, 1])
    start_cfg = _with_params(cfg0, theta0)

    def objective(z):
        try:
            val = nlml(train, _with_params(cfg0, np.exp(z)))
        except (GpNumericalError, ValueError, FloatingPointError):
            return math.inf
        return val if math.isfinite(val) else math.inf

    z_init = np.log(theta0)
    base = objective(z_init)
    if np.all(hi - lo == 0):
        return start_cfg
    rng = np.random.default_rng(seed)
    starts = [z_init] + [rng.uniform(lo, hi) for _ in range(max(n_starts, 1) - 1)]
    step0 = max(float(np.max(hi - lo)) / 4.0, 4 * tol)
    if n_starts <= 1:
        step0 = min(step0, 0.25)
    best_z, best_f = z_init, base
    for z0 in starts:
        z, fz = _coordinate_search(objective, z0, lo, hi, step0, tol, max_evals)
        if fz < best_f:
            best_z, best_f = z, fz
    if not math.isfinite(best_f):
        warnings.warn("hyperparameter search failed from every start; keeping cfg0",
                      HyperparameterWarning, stacklevel=2)
        return cfg0
    return _with_params(cfg0, np.exp(best_z))
