"""Experiment runner: configuration, repetitions, trace files and summaries.

A run writes one CSV trace per repetition plus one JSON summary into the
output directory. Summaries only aggregate completed repetitions, and every
number in them can be recomputed from the traces and the problem oracles.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .acquisition import PsoConfig
from .benchmarks.axis import PlantModel, axis_problem, scurve_reference
from .benchmarks.synthetic import mv_optimum, synthetic_problem
from .gp import KernelConfig
from .loops import ALGORITHMS, RunAborted, RunTrace, run_algorithm
from .presets import gp_preset
from .problem import GpSetup, ProblemDefinition
from .risk import RiskConfig

__all__ = [
    "PROBLEMS",
    "PLOT_KINDS",
    "ConfigError",
    "ExperimentConfig",
    "SummaryReport",
    "build_problem",
    "run_experiment",
    "compare",
    "export_plot_data",
    "read_trace",
    "write_trace",
    "trace_rows",
]

PROBLEMS = ("synthetic", "axis-2d", "axis-4d")
PLOT_KINDS = ("cost-vs-t", "var-vs-t", "regret-vs-t", "mean-vs-var-scatter")
_GP_KEYS = ("signal_std", "lengthscales", "prior_mean", "prior_scale", "noise_var", "tune_bounds")


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    ``gp`` maps ``f``, ``q`` or ``var`` to overrides of the problem's default
    GP (keys ``signal_std``, ``lengthscales``, ``prior_mean``,
    ``prior_scale``, ``noise_var``, ``tune_bounds``). ``gp_preset`` swaps in a
    named block from the shipped presets first. ``plant`` and ``reference``
    hold keyword arguments for :class:`PlantModel` and
    :func:`scurve_reference` on the axis problems. ``workers = 0`` uses
    every available core.
    """

    problem: str = "synthetic"
    algorithm: str = "ragoose"
    alpha: float = 0.0
    iters: int = 200
    k: int = 10
    reps: int = 30
    seed: int = 0
    out: str = "runs"
    beta_f: float = 3.0
    beta_var: float = 3.0
    beta_q: float = 3.0
    pso: PsoConfig = PsoConfig()
    gp_preset: Optional[str] = None
    gp: dict = field(default_factory=dict)
    full_tune_every: Optional[int] = None
    tune_starts: Optional[int] = None
    regret_weight: float = 50.0
    workers: int = 0
    plant: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.iters < 1:
            raise ConfigError("iters must be >= 1")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        for name in self.gp:
            if name not in ("f", "q", "var"):
                raise ConfigError(f"gp overrides only apply to f, q, var; got {name!r}")
            unknown = set(self.gp[name]) - set(_GP_KEYS)
            if unknown:
                raise ConfigError(f"unknown gp keys for {name}: {sorted(unknown)}")
        if (self.plant or self.reference) and self.problem == "synthetic":
            raise ConfigError("plant and reference settings only apply to the axis problems")
        try:
            self.risk()
            self._axis_parts()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def _axis_parts(self):
        plant = PlantModel(**self.plant)
        return plant, scurve_reference(**{"fs": plant.fs, **self.reference})

    def risk(self) -> RiskConfig:
        alpha = self.alpha if self.algorithm == "ragoose" else 0.0
        return RiskConfig(alpha=alpha, k=self.k, beta_f=self.beta_f, beta_var=self.beta_var,
                          beta_q=self.beta_q)

    @property
    def label(self) -> str:
        return f"{self.problem}_{self.algorithm}_a{self.alpha:g}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gp"] = json.loads(json.dumps(self.gp))
        d["plant"] = json.loads(json.dumps(self.plant))
        d["reference"] = json.loads(json.dumps(self.reference))
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        try:
            if "pso" in data and not isinstance(data["pso"], PsoConfig):
                data["pso"] = PsoConfig(**(data["pso"] or {}))
            for key, typ in (("alpha", float), ("iters", int), ("k", int), ("reps", int),
                             ("seed", int), ("workers", int), ("regret_weight", float)):
                if key in data:
                    data[key] = typ(data[key])
            if "out" in data:
                data["out"] = str(data["out"])
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _apply_gp(setup: GpSetup, overrides: dict, dim: int, name: str) -> GpSetup:
    k = setup.kernel
    ls = overrides.get("lengthscales", k.lengthscales)
    ls = tuple(float(v) for v in np.atleast_1d(ls))
    if len(ls) != dim:
        raise ConfigError(f"{name}: {len(ls)} lengthscales for a {dim}-d problem")
    try:
        kernel = KernelConfig(
            float(overrides.get("signal_std", k.signal_std)), ls,
            prior_mean=float(overrides.get("prior_mean", k.prior_mean)),
            prior_scale=float(overrides.get("prior_scale", k.prior_scale)),
        )
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    tb = overrides.get("tune_bounds", setup.tune_bounds)
    if tb is not None:
        tb = np.asarray(tb, dtype=float)
        if tb.shape != (1 + dim, 2):
            raise ConfigError(f"{name}: tune_bounds must have shape ({1 + dim}, 2)")
    return GpSetup(kernel, float(overrides.get("noise_var", setup.noise_var)), tb)


def build_problem(cfg: ExperimentConfig) -> ProblemDefinition:
    """Problem instance with the config's GP preset, overrides and tuning cadence."""
    if cfg.problem == "synthetic":
        problem = synthetic_problem()
    else:
        plant, ref = cfg._axis_parts()
        problem = axis_problem("numeric-2d" if cfg.problem == "axis-2d" else "full-4d", plant, ref)
    models = problem.models
    gp = {name: dict(v) for name, v in cfg.gp.items()}
    if cfg.gp_preset is not None:
        try:
            preset = gp_preset(cfg.gp_preset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc
        for name in ("f", "q", "var"):
            sd, mu, nv = preset[name]
            base = {"signal_std": sd, "prior_mean": mu, "noise_var": nv,
                    "lengthscales": preset["lengthscales"]}
            base.update(gp.get(name, {}))
            gp[name] = base
    dim = problem.dim
    updates = {name: _apply_gp(getattr(models, name), gp[name], dim, name) for name in gp}
    if cfg.full_tune_every is not None:
        updates["full_tune_every"] = int(cfg.full_tune_every)
    if cfg.tune_starts is not None:
        updates["tune_starts"] = int(cfg.tune_starts)
    problem.models = replace(models, **updates)
    return problem


# -- traces ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def trace_rows(trace: RunTrace, problem: ProblemDefinition, rep: int) -> tuple[list, list]:
    """Header and rows of a trace CSV.

    The leading columns are ``rep, t, x1..xd, y_mean, s2, m, role, violation,
    acq_value, recommended``; ``recommended`` marks queries equal to the final
    recommendation. Oracle values at ``x_t``, the constraint ucb and the
    per-iteration recommendation follow.
    """
    d = problem.dim
    header = (["rep", "t"] + [f"x{i + 1}" for i in range(d)]
              + ["y_mean", "s2", "m", "role", "violation", "acq_value", "recommended",
                 "f_true", "rho2_true", "ucb_q"] + [f"rec_x{i + 1}" for i in range(d)])
    rows = []
    final = trace.final_x
    for r in trace.records:
        rec_flag = final is not None and np.array_equal(np.asarray(r.x), np.asarray(final))
        rows.append([rep, r.t, *r.x, r.y, r.s2, r.m, r.role, r.violation, r.acq_value,
                     rec_flag, problem.objective(r.x), problem.noise_std(r.x) ** 2, r.ucb_q,
                     *r.recommendation])
    return header, rows


def write_trace(path, trace: RunTrace, problem: ProblemDefinition, rep: int) -> None:
    header, rows = trace_rows(trace, problem, rep)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_trace(path) -> list[dict]:
    """Rows of a trace CSV with numeric columns parsed."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, val in row.items():
                if key == "role":
                    parsed[key] = val
                elif key in ("rep", "t", "violation", "recommended"):
                    parsed[key] = int(val)
                else:
                    parsed[key] = float(val)
            out.append(parsed)
    return out


# -- summaries --------------------------------------------------------------

def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else float("nan")


def _two_se(values) -> float:
    values = np.asarray(list(values), dtype=float)
    if values.size < 2:
        return 0.0
    return float(2.0 * values.std(ddof=1) / np.sqrt(values.size))


@dataclass
class SummaryReport:
    """Per-repetition results plus the statistics derived from them."""

    config: dict
    reps: list
    regret_optimum: Optional[float] = None

    @property
    def problem(self) -> str:
        return self.config["problem"]

    @property
    def algorithm(self) -> str:
        return self.config["algorithm"]

    @property
    def alpha(self) -> float:
        return float(self.config["alpha"]) if self.algorithm == "ragoose" else 0.0

    @property
    def label(self) -> str:
        return f"{self.algorithm}(a={self.alpha:g})" if self.algorithm == "ragoose" else self.algorithm

    @property
    def completed(self) -> list:
        return [r for r in self.reps if r["status"] == "ok"]

    @property
    def failures(self) -> list:
        return [r for r in self.reps if r["status"] != "ok"]

    @property
    def mean_f(self) -> float:
        return _mean(r["f"] for r in self.completed)

    @property
    def mean_rho2(self) -> float:
        return _mean(r["rho2"] for r in self.completed)

    @property
    def violation_rate(self) -> float:
        done = self.completed
        n = sum(r["n_records"] for r in done)
        return sum(r["violations"] for r in done) / n if n else float("nan")

    @property
    def mean_wall_time(self) -> float:
        return _mean(r["wall_time"] for r in self.completed)

    def regret(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """Per-iteration mean regret and two standard errors over completed reps."""
        series = [r["regret"] for r in self.completed if r.get("regret") is not None]
        if not series:
            return None
        R = np.array(series, dtype=float)
        mean = np.array([_mean(col) for col in R.T])
        two_se = np.array([_two_se(col) for col in R.T])
        return mean, two_se

    def stats(self) -> dict:
        out = {
            "completed": len(self.completed),
            "failed": len(self.failures),
            "mean_f": self.mean_f,
            "two_se_f": _two_se(r["f"] for r in self.completed),
            "mean_rho2": self.mean_rho2,
            "two_se_rho2": _two_se(r["rho2"] for r in self.completed),
            "violation_rate": self.violation_rate,
            "mean_wall_time": self.mean_wall_time,
        }
        reg = self.regret()
        if reg is not None:
            out["regret_mean"] = reg[0].tolist()
            out["regret_two_se"] = reg[1].tolist()
        return out

    def to_dict(self) -> dict:
        return {"config": self.config, "regret_optimum": self.regret_optimum,
                "reps": self.reps, "stats": self.stats()}

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True) + "\n")

    @classmethod
    def from_file(cls, path) -> "SummaryReport":
        data = json.loads(Path(path).read_text())
        try:
            return cls(config=data["config"], reps=data["reps"],
                       regret_optimum=data.get("regret_optimum"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path} is not a summary file") from exc


def _optimum_mv(cfg: ExperimentConfig) -> Optional[float]:
    if cfg.problem != "synthetic":
        return None
    _, f, v = mv_optimum(cfg.regret_weight)
    return f + cfg.regret_weight * v


def _run_rep(cfg_dict: dict, rep: int) -> dict:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    problem = build_problem(cfg)
    seed = cfg.seed + rep
    result = {"rep": rep, "seed": seed, "status": "ok", "trace": None, "error": None}
    try:
        result["trace"] = run_algorithm(problem, cfg.algorithm, cfg.risk(), cfg.pso,
                                        cfg.iters, seed)
    except RunAborted as exc:
        result.update(status="failed", trace=exc.trace, error=str(exc))
    except Exception as exc:  # keep the remaining repetitions going
        result.update(status="failed", error="".join(traceback.format_exception_only(exc)).strip())
    return result


def _rep_summary(result: dict, problem: ProblemDefinition, opt_mv: Optional[float],
                 weight: float) -> dict:
    tr: Optional[RunTrace] = result["trace"]
    out = {"rep": result["rep"], "seed": result["seed"], "status": result["status"]}
    if result["error"]:
        out["error"] = result["error"]
    if tr is None:
        return out
    out.update(
        n_records=len(tr),
        violations=int(tr.violations),
        wall_time=tr.wall_time,
        iter_wall_time=_mean(r.wall_time for r in tr.records),
        seed_x=tr.seed_x.tolist(), seed_y=tr.seed_y.tolist(),
        seed_s2=tr.seed_s2.tolist(), seed_m=tr.seed_m.tolist(),
    )
    if tr.final_x is not None:
        x = tr.final_x
        out.update(final_x=[float(v) for v in x], f=problem.objective(x),
                   rho2=problem.noise_std(x) ** 2)
    if opt_mv is not None:
        out["regret"] = [problem.mv(r.x, weight) - opt_mv for r in tr.records]
    return out


def _check_writable(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-probe"
    probe.write_text("")
    probe.unlink()


def run_experiment(cfg: ExperimentConfig, return_traces: bool = False):
    """Run ``cfg.reps`` repetitions with seeds ``cfg.seed + i``.

    Returns the :class:`SummaryReport`, or ``(report, traces)`` with
    ``return_traces``. Raises ``OSError`` before any run when the output
    directory is not writable.
    """
    out = Path(cfg.out)
    _check_writable(out)
    problem = build_problem(cfg)  # surface config errors before any work
    cfg_dict = cfg.to_dict()
    workers = cfg.workers or os.cpu_count() or 1
    workers = min(workers, cfg.reps)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_rep, [cfg_dict] * cfg.reps, range(cfg.reps)))
    else:
        results = [_run_rep(cfg_dict, rep) for rep in range(cfg.reps)]
    opt_mv = _optimum_mv(cfg)
    reps, traces = [], []
    for res in results:
        if res["trace"] is not None:
            write_trace(out / f"{cfg.label}_rep{res['rep']:03d}.csv", res["trace"], problem,
                        res["rep"])
        reps.append(_rep_summary(res, problem, opt_mv, cfg.regret_weight))
        traces.append(res["trace"])
    report = SummaryReport(config=cfg_dict, reps=reps, regret_optimum=opt_mv)
    report.write(out / f"{cfg.label}_summary.json")
    return (report, traces) if return_traces else report


# -- comparison and plot data ---------------------------------------------

def compare(reports: Sequence[SummaryReport], fmt: str = "text") -> str:
    """Side-by-side table of final cost, noise, violations and wall time.

    Columns follow the algorithm order ragoose, goose, cbo, then ascending
    alpha; reports with equal keys keep their input order.
    """
    if len(reports) < 2:
        raise ValueError("compare needs at least two reports")
    problems = {r.problem for r in reports}
    if len(problems) != 1:
        raise ValueError(f"reports cover different problems: {sorted(problems)}")
    order = sorted(range(len(reports)),
                   key=lambda i: (ALGORITHMS.index(reports[i].algorithm), reports[i].alpha))
    cols = [reports[i] for i in order]
    rows = [
        ("f(x*)", [r.mean_f for r in cols], "{:.4g}"),
        ("rho2(x*)", [r.mean_rho2 for r in cols], "{:.4g}"),
        ("violations [%]", [100 * r.violation_rate for r in cols], "{:.2f}"),
        ("time [s]", [r.mean_wall_time for r in cols], "{:.1f}"),
    ]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric"] + [r.label for r in cols])
        for name, vals, _ in rows:
            w.writerow([name] + [repr(float(v)) for v in vals])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    head = [f"problem: {cols[0].problem}"] + [r.label for r in cols]
    body = [[name] + [f.format(v) for v in vals] for name, vals, f in rows]
    widths = [max(len(row[j]) for row in [head] + body) for j in range(len(head))]
    lines = ["  ".join(cell.ljust(widths[j]) if j == 0 else cell.rjust(widths[j])
                       for j, cell in enumerate(row)) for row in [head] + body]
    return "\n".join(lines) + "\n"


def _per_t(tables: list[list[dict]], value) -> list[tuple]:
    by_t: dict[int, list[float]] = {}
    for rows in tables:
        for row in rows:
            by_t.setdefault(row["t"], []).append(value(row))
    out = []
    for t in sorted(by_t):
        vals = by_t[t]
        out.append((t, "mean", _mean(vals)))
        out.append((t, "two_se", _two_se(vals)))
    return out


def export_plot_data(paths: Sequence, kind: str, weight: float = 50.0,
                     optimum_mv: Optional[float] = None) -> str:
    """Long-format CSV for one figure kind from trace files.

    ``cost-vs-t`` uses the true cost at each query, ``var-vs-t`` the observed
    sample variance, ``regret-vs-t`` the mean-variance regret with
    ``weight`` (the synthetic optimum is used when ``optimum_mv`` is None).
    ``mean-vs-var-scatter`` emits one row per query keyed by file name.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    if not paths:
        raise ValueError("no trace files given")
    tables = [read_trace(p) for p in paths]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "mean-vs-var-scatter":
        w.writerow(["y_mean", "s2", "color_key"])
        for p, rows in zip(paths, tables):
            key = Path(p).stem
            for row in rows:
                w.writerow([repr(row["y_mean"]), repr(row["s2"]), key])
        return buf.getvalue()
    if kind == "cost-vs-t":
        series = _per_t(tables, lambda r: r["f_true"])
    elif kind == "var-vs-t":
        series = _per_t(tables, lambda r: r["s2"])
    else:
        if optimum_mv is None:
            _, f, v = mv_optimum(weight)
            optimum_mv = f + weight * v
        series = _per_t(tables, lambda r: r["f_true"] + weight * r["rho2_true"] - optimum_mv)
    w.writerow(["t", "statistic", "value"])
    for t, stat, val in series:
        w.writerow([t, stat, repr(float(val))])
    return buf.getvalue()
