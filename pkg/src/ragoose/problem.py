"""Problem definitions shared by the optimisation loops and the benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .gp import KernelConfig

__all__ = ["GpSetup", "ModelSetup", "ProblemDefinition"]

Oracle = Callable[[np.ndarray], float]
Sampler = Callable[[np.ndarray, int, np.random.Generator], tuple[np.ndarray, float]]


@dataclass(frozen=True)
class GpSetup:
    """Initial kernel, homoscedastic observation noise variance and tuning box.

    ``tune_bounds`` is a ``(1 + d, 2)`` box over ``(signal_std, lengthscales)``;
    ``None`` keeps the kernel fixed.
    """

    kernel: KernelConfig
    noise_var: float = 0.0
    tune_bounds: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ModelSetup:
    f: GpSetup
    q: GpSetup
    var: GpSetup
    # full multi-start retune every N iterations, warm single-start otherwise
    full_tune_every: int = 25
    tune_starts: int = 8


@dataclass
class ProblemDefinition:
    """A black-box problem with a known safe seed.

    ``objective``, ``noise_std`` and ``constraint`` are the latent oracles
    used for reporting (true cost, true noise, regret). Observations come
    from ``sampler`` when given, otherwise from Gaussian noise around the
    oracles.
    """

    name: str
    bounds: np.ndarray
    seeds: np.ndarray
    threshold: float
    objective: Oracle
    noise_std: Oracle
    constraint: Oracle
    constraint_noise_std: float
    models: ModelSetup
    sampler: Optional[Sampler] = None
    eps: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        self.seeds = np.asarray(self.seeds, dtype=float).reshape(-1, self.dim)
        if self.seeds.shape[0] == 0:
            raise ValueError("the safe seed must not be empty")
        if self.eps is None:
            self.eps = 6.0 * self.constraint_noise_std
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def sample(self, x, k: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        """Draw ``k`` objective observations and one constraint observation at ``x``."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        if self.sampler is not None:
            ys, m = self.sampler(x, k, rng)
            return np.asarray(ys, dtype=float), float(m)
        ys = self.objective(x) + self.noise_std(x) * rng.standard_normal(k)
        m = self.constraint(x) + self.constraint_noise_std * rng.standard_normal()
        return ys, float(m)

    def mv(self, x, weight: float) -> float:
        return float(self.objective(x) + weight * self.noise_std(x) ** 2)

    def check_seeds(self) -> bool:
        return all(self.constraint(s) <= self.threshold for s in self.seeds)
