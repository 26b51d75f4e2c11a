"""Sample statistics, the variance-GP noise schedule and the mean-variance objective."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gp import GpModel

__all__ = ["RiskConfig", "SampleBatch", "aggregate", "noise_schedule", "mv_value"]


@dataclass(frozen=True)
class RiskConfig:
    """Risk/exploration knobs shared by the loops.

    alpha : coefficient of absolute risk tolerance (1/output units)
    k : repeated objective evaluations per query
    beta_f, beta_var, beta_q : confidence multipliers of the three GPs
    v_min : floor on ``ucb_var`` before dividing by ``k``
    """

    alpha: float = 0.0
    k: int = 10
    beta_f: float = 3.0
    beta_var: float = 3.0
    beta_q: float = 3.0
    v_min: float = 1e-12

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        for name in ("alpha", "beta_f", "beta_var", "beta_q", "v_min"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class SampleBatch:
    x: np.ndarray
    observations: np.ndarray
    constraint: float


def aggregate(batch: SampleBatch | Sequence[float]) -> tuple[float, float]:
    """Return the sample mean and the unbiased (``k - 1``) sample variance."""
    obs = batch.observations if isinstance(batch, SampleBatch) else batch
    y = np.asarray(obs, dtype=float).reshape(-1)
    if y.size < 2:
        raise ValueError(f"need at least 2 observations, got {y.size}")
    # fsum is correctly rounded, so the result does not depend on order
    mean = math.fsum(y) / y.size
    dev = y - mean
    return mean, max(math.fsum(dev * dev) / (y.size - 1), 0.0)


def noise_schedule(var_model: GpModel, xs, k: int, beta_var: float,
                   v_min: float = 1e-12) -> np.ndarray:
    """Per-point noise variances ``max(ucb_var(x), v_min) / k`` for the objective GP."""
    X = np.asarray(xs, dtype=float)
    if X.size == 0:
        return np.zeros(0)
    _, ucb = var_model.bounds(X, beta_var)
    return np.maximum(ucb, v_min) / k


def mv_value(f_val, var_val, alpha: float):
    """Mean-variance objective ``f + alpha * rho^2``."""
    return f_val + alpha * var_val
