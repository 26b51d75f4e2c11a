"""One-dimensional sinusoidal benchmark with heteroscedastic noise.

``f`` has three global minima (value -1) at 1.5, 4.5 and 7.5. The noise
variance is a sigmoid that is low at 1.5 and high at 4.5, and the constraint
is a sigmoid that makes 7.5 unsafe for ``c = 3``. So the risk-averse safe
optimum is 1.5, the risk-neutral one is ambiguous between 1.5 and 4.5, and
7.5 is the constraint-violating trap.
"""

from __future__ import annotations

import numpy as np

from ..gp import KernelConfig
from ..problem import GpSetup, ModelSetup, ProblemDefinition

DOMAIN = (0.0, 10.0)
THRESHOLD = 3.0
CONSTRAINT_NOISE_STD = 0.1
SEED_POINTS = np.linspace(0.0, 1.0, 5)
MINIMIZERS = {"opt": 1.5, "hv": 4.5, "cv": 7.5}


def objective(x) -> float:
    x = float(np.asarray(x).reshape(-1)[0])
    return float(np.cos(2.0 * np.pi * x / 3.0))


def noise_var(x) -> float:
    x = float(np.asarray(x).reshape(-1)[0])
    return 0.01 + 0.19 / (1.0 + np.exp(-3.0 * (x - 3.0)))


def noise_std(x) -> float:
    return float(np.sqrt(noise_var(x)))


def constraint(x) -> float:
    x = float(np.asarray(x).reshape(-1)[0])
    return float(6.0 / (1.0 + np.exp(-2.0 * (x - 6.5))))


def synthetic_eval(x, rng: np.random.Generator, k: int = 1) -> tuple[np.ndarray, float]:
    """``k`` raw objective draws and one constraint draw at ``x``."""
    x = float(np.asarray(x).reshape(-1)[0])
    if not DOMAIN[0] <= x <= DOMAIN[1]:
        raise ValueError(f"x={x} outside the domain {DOMAIN}")
    ys = objective(x) + noise_std(x) * rng.standard_normal(k)
    m = constraint(x) + CONSTRAINT_NOISE_STD * rng.standard_normal()
    return ys, float(m)


def default_models() -> ModelSetup:
    return ModelSetup(
        f=GpSetup(
            KernelConfig(1.0, (1.0,), prior_mean=0.0),
            tune_bounds=np.array([[0.3, 3.0], [0.4, 3.0]]),
        ),
        q=GpSetup(
            KernelConfig(2.0, (1.5,), prior_mean=0.0),
            noise_var=CONSTRAINT_NOISE_STD**2,
            tune_bounds=np.array([[1.5, 10.0], [0.5, 2.0]]),
        ),
        var=GpSetup(
            KernelConfig(0.1, (1.0,), prior_mean=0.05),
            noise_var=0.05**2,
            tune_bounds=np.array([[0.02, 0.5], [0.5, 5.0]]),
        ),
    )


def synthetic_problem() -> ProblemDefinition:
    return ProblemDefinition(
        name="synthetic",
        bounds=np.array([DOMAIN]),
        seeds=SEED_POINTS[:, None],
        threshold=THRESHOLD,
        objective=objective,
        noise_std=noise_std,
        constraint=constraint,
        constraint_noise_std=CONSTRAINT_NOISE_STD,
        models=default_models(),
    )


def mv_optimum(weight: float, n: int = 100_001) -> tuple[float, float, float]:
    """Dense-grid minimiser of ``f + weight * rho^2`` over the true safe set.

    Returns ``(x, f(x), rho^2(x))``.
    """
    xs = np.linspace(*DOMAIN, n)
    f = np.cos(2.0 * np.pi * xs / 3.0)
    v = 0.01 + 0.19 / (1.0 + np.exp(-3.0 * (xs - 3.0)))
    q = 6.0 / (1.0 + np.exp(-2.0 * (xs - 6.5)))
    mv = np.where(q <= THRESHOLD, f + weight * v, np.inf)
    i = int(np.argmin(mv))
    return float(xs[i]), float(f[i]), float(v[i])
