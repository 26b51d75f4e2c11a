"""End-to-end optimisation loops: RAGoOSE, the GoOSE and CBO baselines.

All three share one driver. Each iteration refits the GPs, builds the safe
region (safe methods only), proposes a query, draws ``k`` objective samples
plus one constraint sample there and appends an :class:`EvaluationRecord`.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .acquisition import (AcquisitionContext, InfeasibleError, PsoConfig,
                          constrained_ei, pso_minimize, rahbo_acq)
from .gp import GpModel, KernelConfig, TrainingSet, fit, tune_hyperparameters
from .problem import GpSetup, ProblemDefinition
from .risk import RiskConfig, aggregate, noise_schedule
from .safeset import (DiscretizedDomain, SafeRegion, build_safe_region,
                      discretization_step, select_expander)

__all__ = [
    "ALGORITHMS",
    "EvaluationRecord",
    "RunAborted",
    "audit_trace",
    "RunTrace",
    "ragoose_run",
    "goose_run",
    "cbo_run",
    "run_algorithm",
    "recommend",
    "regret_series",
]

ALGORITHMS = ("ragoose", "goose", "cbo")
ROLES = ("optimum", "expander", "fallback")
HOMOSCEDASTIC_FLOOR = 1e-12


@dataclass
class EvaluationRecord:
    t: int
    x: np.ndarray
    y: float
    s2: float
    m: float
    role: str
    violation: bool
    acq_value: float
    # constraint ucb at x under the iteration's model; expander membership
    ucb_q: float
    in_expanders: bool
    recommendation: np.ndarray
    q_kernel: KernelConfig
    wall_time: float = 0.0


@dataclass
class RunTrace:
    algorithm: str
    problem: str
    seed: int
    alpha: float
    records: list
    seed_x: np.ndarray
    seed_y: np.ndarray
    seed_s2: np.ndarray
    seed_m: np.ndarray
    final_x: Optional[np.ndarray] = None
    final_kernels: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x for r in self.records]).reshape(len(self.records), -1)

    @property
    def violations(self) -> int:
        return sum(r.violation for r in self.records)


class RunAborted(RuntimeError):
    """A run stopped early; ``trace`` holds the records completed so far."""

    def __init__(self, message: str, trace: Optional["RunTrace"]):
        super().__init__(message)
        self.trace = trace


def recommend(f_model: GpModel, var_model: Optional[GpModel], candidates: np.ndarray,
              alpha: float, beta_f: float = 3.0, beta_var: float = 3.0,
              fallback: Optional[np.ndarray] = None) -> np.ndarray:
    """Pessimistic recommendation ``argmin ucb_f + alpha * max(ucb_var, 0)``.

    ``candidates`` are the certified-safe inputs in priority order; ties go
    to the first. With no candidates the best of ``fallback`` (the seeds)
    under the same score is returned.
    """
    C = np.atleast_2d(np.asarray(candidates, dtype=float))
    if C.size == 0 or C.shape[0] == 0:
        if fallback is None:
            raise ValueError("no candidates and no fallback")
        C = np.atleast_2d(fallback)
    _, score = f_model.bounds(C, beta_f)
    if alpha and var_model is not None:
        _, ucb_var = var_model.bounds(C, beta_var)
        score = score + alpha * np.maximum(ucb_var, 0.0)
    return C[int(np.argmin(score))].copy()


def regret_series(trace: RunTrace, problem: ProblemDefinition, optimum_mv: float,
                  weight: float = 50.0) -> np.ndarray:
    """``MV_w(x_t) - MV_w(x*)`` per iteration, non-negative for minimisation."""
    return np.array([problem.mv(r.x, weight) - optimum_mv for r in trace.records])


class _Driver:
    def __init__(self, problem: ProblemDefinition, algorithm: str, risk: RiskConfig,
                 pso: PsoConfig, seed: int):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.problem = problem
        self.algorithm = algorithm
        self.risk = risk if algorithm == "ragoose" else RiskConfig(
            alpha=0.0, k=risk.k, beta_f=risk.beta_f, beta_var=risk.beta_var,
            beta_q=risk.beta_q, v_min=risk.v_min)
        self.pso = pso
        self.seed = seed
        eval_ss, pso_ss = np.random.SeedSequence(seed).spawn(2)
        self.eval_rng = np.random.default_rng(eval_ss)
        self.pso_rng = np.random.default_rng(pso_ss)
        ms = problem.models
        self.kernels = {"f": ms.f.kernel, "q": ms.q.kernel, "var": ms.var.kernel}
        self.X, self.Y, self.S2, self.M = [], [], [], []
        self.fallback_count = 0

    # -- data -------------------------------------------------------------
    def evaluate(self, x):
        ys, m = self.problem.sample(x, self.risk.k, self.eval_rng)
        y, s2 = aggregate(ys)
        self.X.append(np.asarray(x, dtype=float).reshape(-1))
        self.Y.append(y)
        self.S2.append(s2)
        self.M.append(m)
        return y, s2, m

    def _Xarr(self):
        return np.array(self.X).reshape(len(self.X), self.problem.dim)

    # -- models -----------------------------------------------------------
    def _tuned(self, name: str, setup: GpSetup, train: TrainingSet, t: int) -> KernelConfig:
        ms = self.problem.models
        if setup.tune_bounds is None or len(train) < 2:
            return self.kernels[name]
        full = t <= 1 or (ms.full_tune_every > 0 and (t - 1) % ms.full_tune_every == 0)
        cfg = tune_hyperparameters(train, setup.tune_bounds, self.kernels[name],
                                   n_starts=ms.tune_starts if full else 1)
        self.kernels[name] = cfg
        return cfg

    def fit_models(self, t: int):
        ms = self.problem.models
        X = self._Xarr()
        q_train = TrainingSet(X, np.array(self.M), ms.q.noise_var)
        q_model = fit(q_train, self._tuned("q", ms.q, q_train, t))
        var_model = None
        if self.algorithm == "ragoose":
            v_train = TrainingSet(X, np.array(self.S2), ms.var.noise_var)
            var_model = fit(v_train, self._tuned("var", ms.var, v_train, t))
            f_noise = noise_schedule(var_model, X, self.risk.k, self.risk.beta_var, self.risk.v_min)
        else:
            f_noise = max(float(np.mean(self.S2)), HOMOSCEDASTIC_FLOOR) / self.risk.k
        f_train = TrainingSet(X, np.array(self.Y), f_noise)
        f_model = fit(f_train, self._tuned("f", ms.f, f_train, t))
        return f_model, var_model, q_model

    def region(self, q_model: GpModel, t: int) -> SafeRegion:
        domain = DiscretizedDomain(self.problem.bounds, discretization_step(q_model.config))
        return build_safe_region(q_model, domain, self.risk.beta_q, self.problem.eps,
                                 self.problem.threshold, t)

    def candidates(self, region: SafeRegion, q_model: GpModel) -> np.ndarray:
        """Safe grid cells followed by evaluated inputs still certified safe."""
        X = self._Xarr()
        _, ucb = q_model.bounds(X, self.risk.beta_q)
        return np.vstack([region.safe_points, X[ucb <= self.problem.threshold]])

    def next_fallback(self) -> np.ndarray:
        x = self.problem.seeds[self.fallback_count % len(self.problem.seeds)]
        self.fallback_count += 1
        return x


def _propose_cbo(drv: _Driver, f_model, q_model, domain: DiscretizedDomain):
    c = drv.problem.threshold
    Y, M = np.array(drv.Y), np.array(drv.M)
    feasible = M <= c
    incumbent = float(np.min(Y[feasible])) if np.any(feasible) else float(np.min(Y))

    def neg_ei(X):
        return -constrained_ei(f_model, q_model, incumbent, X, c)

    grid_vals = neg_ei(domain.points)
    j = int(np.argmin(grid_vals))
    best_x, best_v = domain.points[j].copy(), float(grid_vals[j])
    ctx = AcquisitionContext(f_model, None, q_model, drv.risk, None, c, bounds=drv.problem.bounds)
    x, v = pso_minimize(neg_ei, ctx, drv.pso, drv.pso_rng)
    if v < best_v:
        best_x, best_v = x, v
    return best_x, -best_v


def run_algorithm(problem: ProblemDefinition, algorithm: str, risk: RiskConfig,
                  pso: PsoConfig, T: int, seed: int) -> RunTrace:
    if T < 1:
        raise ValueError("T must be >= 1")
    started = time.perf_counter()
    drv = _Driver(problem, algorithm, risk, pso, seed)
    try:
        for s in problem.seeds:
            drv.evaluate(s)
    except Exception as exc:
        raise RunAborted(f"seed evaluation failed: {exc}", None) from exc
    n0 = len(problem.seeds)
    trace = RunTrace(
        algorithm=algorithm, problem=problem.name, seed=seed, alpha=drv.risk.alpha,
        records=[], seed_x=drv._Xarr().copy(), seed_y=np.array(drv.Y),
        seed_s2=np.array(drv.S2), seed_m=np.array(drv.M),
        config={"risk": asdict(drv.risk), "pso": asdict(pso), "T": T, "seed": seed,
                "eps": problem.eps, "threshold": problem.threshold},
    )
    c = problem.threshold
    beta_q = drv.risk.beta_q
    x_opt, acq_opt, last_role = None, np.nan, None
    try:
        for t in range(1, T + 1):
            t0 = time.perf_counter()
            f_model, var_model, q_model = drv.fit_models(t)
            region = drv.region(q_model, t)
            rec = recommend(f_model, var_model, drv.candidates(region, q_model), drv.risk.alpha,
                            drv.risk.beta_f, drv.risk.beta_var, fallback=problem.seeds)
            role, x_t, in_exp = None, None, False
            if algorithm == "cbo":
                x_t, acq_opt = _propose_cbo(drv, f_model, q_model, region.domain)
                role = "optimum"
            else:
                ctx = AcquisitionContext(f_model, var_model, q_model, drv.risk, region, c)

                def propose():
                    if region.n_safe == 0:
                        return None, np.nan
                    try:
                        return pso_minimize(lambda X: rahbo_acq(ctx, X), ctx, drv.pso, drv.pso_rng)
                    except InfeasibleError:
                        return None, np.nan

                recomputed = x_opt is None or last_role != "expander"
                if recomputed:
                    x_opt, acq_opt = propose()
                for attempt in range(2):
                    if x_opt is None:
                        break
                    _, ucb = q_model.bounds(x_opt, beta_q)
                    if ucb[0] <= c:
                        x_t, role = np.array(x_opt, dtype=float), "optimum"
                        break
                    cell = int(region.domain.nearest_index(x_opt)[0])
                    if region.safe[cell]:
                        # off-grid point next to the boundary: query its certified cell
                        x_t, role = region.domain.points[cell].copy(), "optimum"
                        break
                    j = select_expander(region, x_opt)
                    if j is not None:
                        x_t, role, in_exp = region.domain.points[j].copy(), "expander", True
                        break
                    if recomputed:
                        break
                    # stale target no longer reachable: retarget once
                    x_opt, acq_opt = propose()
                    recomputed = True
            if x_t is None:
                x_t, role = np.array(drv.next_fallback(), dtype=float), "fallback"
                x_opt = None
            _, ucb_t = q_model.bounds(x_t, beta_q)
            y, s2, m = drv.evaluate(x_t)
            trace.records.append(EvaluationRecord(
                t=t, x=x_t, y=y, s2=s2, m=m, role=role, violation=bool(m > c),
                acq_value=float(acq_opt) if acq_opt is not None else np.nan,
                ucb_q=float(ucb_t[0]), in_expanders=in_exp, recommendation=rec,
                q_kernel=q_model.config, wall_time=time.perf_counter() - t0,
            ))
            last_role = role
    except Exception as exc:
        trace.wall_time = time.perf_counter() - started
        raise RunAborted(f"iteration {len(trace.records) + 1} failed: {exc}", trace) from exc
    f_model, var_model, q_model = drv.fit_models(T + 1)
    region = drv.region(q_model, T + 1)
    trace.final_x = recommend(f_model, var_model, drv.candidates(region, q_model),
                              drv.risk.alpha, drv.risk.beta_f, drv.risk.beta_var,
                              fallback=problem.seeds)
    trace.final_kernels = dict(drv.kernels)
    trace.wall_time = time.perf_counter() - started
    assert len(drv.X) == n0 + T
    return trace


def ragoose_run(problem: ProblemDefinition, risk: RiskConfig, pso: PsoConfig = PsoConfig(),
                T: int = 200, seed: int = 0) -> RunTrace:
    """Safe risk-averse optimisation (mean-variance acquisition, variance GP noise model)."""
    return run_algorithm(problem, "ragoose", risk, pso, T, seed)


def goose_run(problem: ProblemDefinition, pso: PsoConfig = PsoConfig(), T: int = 200,
              seed: int = 0, risk: Optional[RiskConfig] = None) -> RunTrace:
    """Risk-neutral safe baseline: alpha = 0, homoscedastic objective noise."""
    return run_algorithm(problem, "goose", risk or RiskConfig(), pso, T, seed)


def cbo_run(problem: ProblemDefinition, T: int = 200, seed: int = 0,
            risk: Optional[RiskConfig] = None, pso: PsoConfig = PsoConfig()) -> RunTrace:
    """Constrained EI over the whole box, no safe-set restriction."""
    return run_algorithm(problem, "cbo", risk or RiskConfig(), pso, T, seed)


def audit_trace(trace: RunTrace, problem: ProblemDefinition, tol: float = 1e-9) -> list[int]:
    """Iterations whose query breaks its own model's safety certificate.

    The constraint GP of iteration ``t`` is rebuilt from the seed data, the
    first ``t - 1`` records and the kernel logged at ``t``. Optimum queries
    must satisfy ``ucb_q <= c`` and expander queries must sit on an expander
    cell. Fallback queries are exempt.
    """
    risk = trace.config.get("risk", {})
    beta_q = float(risk.get("beta_q", RiskConfig().beta_q))
    c = problem.threshold
    X = np.vstack([trace.seed_x, trace.X]) if len(trace) else trace.seed_x
    M = np.concatenate([trace.seed_m, [r.m for r in trace.records]])
    n0 = len(trace.seed_x)
    bad = []
    for i, r in enumerate(trace.records):
        if r.role == "fallback":
            continue
        train = TrainingSet(X[:n0 + i], M[:n0 + i], problem.models.q.noise_var)
        q_model = fit(train, r.q_kernel)
        if r.role == "optimum":
            _, ucb = q_model.bounds(r.x, beta_q)
            if ucb[0] > c + tol:
                bad.append(r.t)
        else:
            domain = DiscretizedDomain(problem.bounds, discretization_step(q_model.config))
            region = build_safe_region(q_model, domain, beta_q, problem.eps, c, r.t)
            j = int(domain.nearest_index(r.x)[0])
            if not (region.expanders[j] and np.allclose(domain.points[j], r.x, rtol=0, atol=1e-12)):
                bad.append(r.t)
    return bad
