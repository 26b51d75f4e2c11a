"""Command-line entry point.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime
failures (including any failed repetition).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (PLOT_KINDS, ConfigError, ExperimentConfig, SummaryReport, compare,
                      export_plot_data, run_experiment)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ragoose", description="Safe risk-averse Bayesian optimisation experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run repeated optimisation experiments")
    run.add_argument("--problem")
    run.add_argument("--algo", dest="algorithm")
    run.add_argument("--alpha", type=float)
    run.add_argument("--iters", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--reps", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.add_argument("--config", help="YAML experiment config; flags override its values")

    cmp_ = sub.add_parser("compare", help="tabulate summary files of one problem")
    cmp_.add_argument("summaries", nargs="+")
    cmp_.add_argument("--csv", action="store_true", help="emit CSV instead of text")

    plot = sub.add_parser("plot-data", help="export long-format plot data from traces")
    plot.add_argument("--kind", required=True, choices=PLOT_KINDS)
    plot.add_argument("--weight", type=float, default=50.0, help="regret weight")
    plot.add_argument("--optimum-mv", type=float, default=None,
                      help="reference optimum for regret (defaults to the synthetic one)")
    plot.add_argument("--output", "-o", help="write here instead of stdout")
    plot.add_argument("traces", nargs="+")
    return p


def _run(args) -> int:
    data = ExperimentConfig.from_file(args.config).to_dict() if args.config else {}
    for key in ("problem", "algorithm", "alpha", "iters", "k", "reps", "seed", "out", "workers"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    cfg = ExperimentConfig.from_dict(data)
    report = run_experiment(cfg)
    s = report.stats()
    print(f"{cfg.label}: {s['completed']}/{cfg.reps} completed, mean f(x*)={s['mean_f']:.6g}, "
          f"mean rho2(x*)={s['mean_rho2']:.6g}, violation rate={s['violation_rate']:.4%}, "
          f"mean wall time={s['mean_wall_time']:.2f}s")
    for r in report.failures:
        print(f"rep {r['rep']} failed: {r.get('error')}", file=sys.stderr)
    return EXIT_RUNTIME if report.failures else EXIT_OK


def _compare(args) -> int:
    try:
        reports = [SummaryReport.from_file(p) for p in args.summaries]
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        print(compare(reports, "csv" if args.csv else "text"), end="")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return EXIT_OK


def _plot(args) -> int:
    missing = [p for p in args.traces if not Path(p).is_file()]
    if missing:
        raise ConfigError(f"missing trace files: {missing}")
    text = export_plot_data(args.traces, args.kind, args.weight, args.optimum_mv)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        handler = {"run": _run, "compare": _compare, "plot-data": _plot}[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
