"""Grid bookkeeping for the safe set, its boundary and the expanders.

Distances between inputs are Euclidean in lengthscale-normalised coordinates
``x_d / l_d`` of the constraint kernel, and the Lipschitz estimate is the
max-norm of the posterior-mean gradient in the same coordinates, so the
expansion test is unit-free across anisotropic inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gp import GpModel, KernelConfig

__all__ = [
    "DiscretizedDomain",
    "SafeRegion",
    "discretization_step",
    "classify_safe",
    "boundary",
    "expanders",
    "expansion_indicator",
    "select_expander",
    "build_safe_region",
]

CORRELATION_TARGET = 0.95
DEFAULT_MAX_CELLS = 2_000_000


def discretization_step(kernel_q: KernelConfig, correlation: float = CORRELATION_TARGET) -> np.ndarray:
    """Per-dimension step where the normalised RBF correlation drops to ``correlation``."""
    return np.asarray(kernel_q.lengthscales) * math.sqrt(-2.0 * math.log(correlation))


class DiscretizedDomain:
    """Regular grid over a box; cells are flattened in C order.

    The number of points per dimension is chosen so the realised step is at
    most the requested one and both box edges are grid points. If the grid
    would exceed ``max_cells`` every step is scaled up uniformly.
    """

    def __init__(self, bounds, steps, max_cells: int = DEFAULT_MAX_CELLS):
        self.bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
        steps = np.broadcast_to(np.asarray(steps, dtype=float), (self.dim,)).copy()
        if np.any(steps <= 0):
            raise ValueError("grid steps must be positive")
        width = self.bounds[:, 1] - self.bounds[:, 0]
        if np.any(width < 0):
            raise ValueError("bounds must have lower <= upper")

        def counts_for(s):
            return np.where(width > 0, np.ceil(width / s - 1e-9).astype(int) + 1, 1)

        counts = counts_for(steps)
        if np.prod(counts.astype(float)) > max_cells:
            factor = (np.prod(counts.astype(float)) / max_cells) ** (1.0 / self.dim)
            while np.prod(counts.astype(float)) > max_cells:
                steps = steps * factor
                counts = counts_for(steps)
                factor = 1.05
        self.shape = tuple(int(c) for c in counts)
        self.step = np.where(counts > 1, width / np.maximum(counts - 1, 1), 0.0)
        self.axes = [
            np.linspace(lo, hi, n) if n > 1 else np.array([lo])
            for (lo, hi), n in zip(self.bounds, self.shape)
        ]
        self._points = None

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            mesh = np.meshgrid(*self.axes, indexing="ij")
            self._points = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return self._points

    def nearest_index(self, x) -> np.ndarray:
        """Flat index of the nearest grid point for each row of ``x``."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        lo = self.bounds[:, 0]
        safe_step = np.where(self.step > 0, self.step, 1.0)
        idx = np.rint((X - lo) / safe_step).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(tuple(idx.T), self.shape)

    def clip(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, self.bounds[:, 0], self.bounds[:, 1])


def classify_safe(q_model: GpModel, domain: DiscretizedDomain, beta_q: float, c: float) -> np.ndarray:
    """Boolean mask of cells whose constraint ucb is at most ``c``."""
    _, ucb = q_model.bounds(domain.points, beta_q)
    return ucb <= c


def boundary(safe: np.ndarray, domain: DiscretizedDomain) -> np.ndarray:
    """Safe cells with at least one unsafe axis neighbour inside the grid."""
    grid = np.asarray(safe, dtype=bool).reshape(domain.shape)
    unsafe_nb = np.zeros_like(grid)
    for axis in range(grid.ndim):
        if grid.shape[axis] < 2:
            continue
        lead = [slice(None)] * grid.ndim
        lag = [slice(None)] * grid.ndim
        lead[axis] = slice(1, None)
        lag[axis] = slice(None, -1)
        # neighbour at +1 is unsafe
        unsafe_nb[tuple(lag)] |= ~grid[tuple(lead)]
        # neighbour at -1 is unsafe
        unsafe_nb[tuple(lead)] |= ~grid[tuple(lag)]
    return (grid & unsafe_nb).reshape(-1)


def expanders(boundary_mask: np.ndarray, q_model: GpModel, domain: DiscretizedDomain,
              beta_q: float, eps: float) -> np.ndarray:
    """Boundary cells whose constraint confidence width is at least ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    out = np.zeros(domain.size, dtype=bool)
    idx = np.flatnonzero(boundary_mask)
    if idx.size:
        lcb, ucb = q_model.bounds(domain.points[idx], beta_q)
        out[idx] = (ucb - lcb) >= eps
    return out


def _lipschitz(q_model: GpModel, X: np.ndarray) -> np.ndarray:
    grad = q_model.mean_gradient(X) * np.asarray(q_model.config.lengthscales)
    return np.max(np.abs(grad), axis=1)


def normalized_distance(a, b, lengthscales) -> np.ndarray:
    """Pairwise Euclidean distance in lengthscale units, shape ``(len(a), len(b))``."""
    A = np.atleast_2d(a) / np.asarray(lengthscales)
    B = np.atleast_2d(b) / np.asarray(lengthscales)
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def expansion_indicator(x_bar, x, q_model: GpModel, beta_q: float, eps: float, c: float) -> bool:
    """Noisy expansion operator: can ``x_bar`` certify ``x`` as safe?"""
    xb = np.atleast_2d(np.asarray(x_bar, dtype=float))
    lcb, _ = q_model.bounds(xb, beta_q)
    lip = _lipschitz(q_model, xb)[0]
    d = normalized_distance(xb, np.atleast_2d(x), q_model.config.lengthscales)[0, 0]
    return bool(lcb[0] + lip * d + eps <= c)


@dataclass
class SafeRegion:
    """Safe mask, boundary and expanders of one iteration.

    The per-expander ``lcb`` and Lipschitz values are cached so that the
    optimistic-membership test used during acquisition optimisation costs a
    distance computation only.
    """

    domain: DiscretizedDomain
    safe: np.ndarray
    boundary: np.ndarray
    expanders: np.ndarray
    lengthscales: np.ndarray
    eps: float
    threshold: float
    t: int = 0
    expander_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    expander_lcb: np.ndarray = field(default_factory=lambda: np.zeros(0))
    expander_lip: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_safe(self) -> int:
        return int(np.count_nonzero(self.safe))

    @property
    def safe_points(self) -> np.ndarray:
        return self.domain.points[self.safe]

    def in_safe_set(self, X) -> np.ndarray:
        return self.safe[self.domain.nearest_index(X)]

    def in_optimistic_set(self, X) -> np.ndarray:
        """Expansion test from the nearest expander to each candidate."""
        X = np.atleast_2d(X)
        if self.expander_index.size == 0:
            return np.zeros(X.shape[0], dtype=bool)
        pts = self.domain.points[self.expander_index]
        d = normalized_distance(X, pts, self.lengthscales)
        j = np.argmin(d, axis=1)
        rows = np.arange(X.shape[0])
        score = self.expander_lcb[j] + self.expander_lip[j] * d[rows, j] + self.eps
        return score <= self.threshold

    def admissible(self, X) -> np.ndarray:
        return self.in_safe_set(X) | self.in_optimistic_set(X)

    def to_csv(self, path) -> None:
        """Dump grid coordinates with safe/boundary/expander flags."""
        pts = self.domain.points
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(pts.shape[1])] + ["safe", "boundary", "expander"])
            for p, s, b, e in zip(pts, self.safe, self.boundary, self.expanders):
                w.writerow([repr(float(v)) for v in p] + [int(s), int(b), int(e)])


def build_safe_region(q_model: GpModel, domain: DiscretizedDomain, beta_q: float,
                      eps: float, c: float, t: int = 0) -> SafeRegion:
    safe = classify_safe(q_model, domain, beta_q, c)
    bnd = boundary(safe, domain)
    exp = expanders(bnd, q_model, domain, beta_q, eps)
    idx = np.flatnonzero(exp)
    if idx.size:
        lcb, _ = q_model.bounds(domain.points[idx], beta_q)
        lip = _lipschitz(q_model, domain.points[idx])
    else:
        lcb = lip = np.zeros(0)
    return SafeRegion(
        domain=domain, safe=safe, boundary=bnd, expanders=exp,
        lengthscales=np.asarray(q_model.config.lengthscales), eps=eps,
        threshold=c, t=t, expander_index=idx, expander_lcb=lcb, expander_lip=lip,
    )


def select_expander(region: SafeRegion, x_opt) -> int | None:
    """Nearest expander to ``x_opt`` whose expansion test toward it fires.

    Returns a flat grid index, or ``None`` when no expander qualifies. Ties go
    to the lowest index.
    """
    if region.expander_index.size == 0:
        return None
    pts = region.domain.points[region.expander_index]
    d = normalized_distance(pts, np.atleast_2d(x_opt), region.lengthscales)[:, 0]
    fires = region.expander_lcb + region.expander_lip * d + region.eps <= region.threshold
    if not np.any(fires):
        return None
    cand = np.flatnonzero(fires)
    best = cand[np.argmin(d[cand])]  # argmin returns the first, i.e. lowest index
    return int(region.expander_index[best])
