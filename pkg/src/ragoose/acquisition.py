"""Acquisition functions and the swarm optimizer that minimises them.

The swarm never materialises the optimistic safe set: a particle position
counts as admissible when its nearest grid cell is safe or when the nearest
expander certifies it through the noisy expansion test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import log_ndtr, ndtr

from .gp import GpModel
from .risk import RiskConfig
from .safeset import SafeRegion

__all__ = [
    "InfeasibleError",
    "PsoConfig",
    "AcquisitionContext",
    "rahbo_acq",
    "lcb_acq",
    "constrained_ei",
    "pso_minimize",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class InfeasibleError(RuntimeError):
    """No admissible particle position was found."""


@dataclass(frozen=True)
class PsoConfig:
    particles: int = 50
    iterations: int = 80
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    velocity_clamp: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.particles < 4:
            raise ValueError("need at least 4 particles")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not 0 < self.inertia < 1:
            raise ValueError("inertia must lie in (0, 1)")
        if self.cognitive <= 0 or self.social <= 0:
            raise ValueError("acceleration coefficients must be positive")
        if self.velocity_clamp <= 0:
            raise ValueError("velocity_clamp must be positive")


@dataclass
class AcquisitionContext:
    f_model: GpModel
    var_model: Optional[GpModel]
    q_model: GpModel
    risk: RiskConfig
    region: Optional[SafeRegion]
    threshold: float
    bounds: Optional[np.ndarray] = None

    def __post_init__(self):
        dims = {m.dim for m in (self.f_model, self.var_model, self.q_model) if m is not None}
        if len(dims) != 1:
            raise ValueError(f"models disagree on input dimension: {sorted(dims)}")
        if self.bounds is None and self.region is not None:
            self.bounds = self.region.domain.bounds
        if self.bounds is None:
            raise ValueError("either a region or explicit bounds are required")
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))


def lcb_acq(ctx: AcquisitionContext, X) -> np.ndarray:
    lcb, _ = ctx.f_model.bounds(X, ctx.risk.beta_f)
    return lcb


def rahbo_acq(ctx: AcquisitionContext, X) -> np.ndarray:
    """``lcb_f(x) + alpha * max(lcb_var(x), 0)``, vectorised over rows of ``X``."""
    lcb_f = lcb_acq(ctx, X)
    if ctx.risk.alpha == 0 or ctx.var_model is None:
        return lcb_f
    lcb_var, _ = ctx.var_model.bounds(X, ctx.risk.beta_var)
    return lcb_f + ctx.risk.alpha * np.maximum(lcb_var, 0.0)


def constrained_ei(f_model: GpModel, q_model: GpModel, incumbent: float, X,
                   threshold: float) -> np.ndarray:
    """Expected improvement below ``incumbent`` times ``Pr(q(x) <= threshold)``.

    Larger is better. Points with zero predictive spread contribute
    ``max(incumbent - mu, 0)``.
    """
    if not np.isfinite(incumbent):
        raise ValueError("incumbent must be finite")
    mu, var = f_model.predict(X)
    sd = np.sqrt(var)
    gain = incumbent - mu
    ei = np.maximum(gain, 0.0)
    pos = sd > 1e-300
    z = gain[pos] / sd[pos]
    ei[pos] = sd[pos] * (np.exp(-0.5 * z * z) * _INV_SQRT_2PI + z * ndtr(z))
    ei = np.maximum(ei, 0.0)
    mq, vq = q_model.predict(X)
    sq = np.sqrt(vq)
    pf = np.where(sq > 1e-300, np.exp(log_ndtr((threshold - mq) / np.where(sq > 1e-300, sq, 1.0))),
                  (mq <= threshold).astype(float))
    return ei * pf


def _initial_positions(ctx: AcquisitionContext, n: int, rng: np.random.Generator) -> np.ndarray:
    region = ctx.region
    lo, hi = ctx.bounds[:, 0], ctx.bounds[:, 1]
    if region is None:
        return rng.uniform(lo, hi, size=(n, lo.size))
    safe_idx = np.flatnonzero(region.safe)
    if safe_idx.size == 0:
        raise InfeasibleError("safe set is empty")
    cells = region.domain.points[rng.choice(safe_idx, size=n)]
    jitter = rng.uniform(-0.49, 0.49, size=cells.shape) * region.domain.step
    return region.domain.clip(cells + jitter)


def pso_minimize(objective: Callable[[np.ndarray], np.ndarray], ctx: AcquisitionContext,
                 pso: PsoConfig = PsoConfig(),
                 rng: Optional[np.random.Generator] = None) -> tuple[np.ndarray, float]:
    """Minimise a vectorised ``objective`` over the admissible region.

    ``objective`` maps an ``(m, d)`` array to ``m`` values. With
    ``ctx.region=None`` every position in ``ctx.bounds`` is admissible.
    Personal and global bests only move to admissible positions.
    """
    if rng is None:
        rng = np.random.default_rng(pso.seed)
    lo, hi = ctx.bounds[:, 0], ctx.bounds[:, 1]
    width = hi - lo
    vmax = pso.velocity_clamp * width
    region = ctx.region

    def admissible(X):
        if region is None:
            return np.ones(X.shape[0], dtype=bool)
        return region.admissible(X)

    pos = _initial_positions(ctx, pso.particles, rng)
    vel = rng.uniform(-1.0, 1.0, size=pos.shape) * vmax
    best_pos = pos.copy()
    best_val = np.full(pso.particles, np.inf)
    g_pos, g_val = None, np.inf
    for _ in range(pso.iterations):
        vals = np.asarray(objective(pos), dtype=float)
        ok = admissible(pos) & np.isfinite(vals)
        better = ok & (vals < best_val)
        best_pos[better] = pos[better]
        best_val[better] = vals[better]
        j = int(np.argmin(best_val))
        if best_val[j] < g_val:
            g_val, g_pos = float(best_val[j]), best_pos[j].copy()
        if g_pos is None:
            # nothing admissible yet: pull particles back toward their start
            attract = best_pos
        else:
            attract = g_pos[None, :]
        r1 = rng.uniform(size=pos.shape)
        r2 = rng.uniform(size=pos.shape)
        vel = (pso.inertia * vel
               + pso.cognitive * r1 * (best_pos - pos)
               + pso.social * r2 * (attract - pos))
        vel = np.clip(vel, -vmax, vmax)
        pos = np.clip(pos + vel, lo, hi)
    if g_pos is None:
        raise InfeasibleError("no admissible particle position found")
    return g_pos, g_val
