"""Command-line entry point: run, validate and plot experiments.

Exit codes: 0 success, 2 config error, 3 runtime or numerical error,
4 degenerate-weights abort. Failures also leave a machine-readable
``error.txt`` (key = value lines) in the output directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import parse_config
from .evaluation import read_metrics_csv
from .exceptions import ConfigError, DegenerateWeights, InferenceError
from .experiments import TIMING_METRICS, run_experiment
from .svgplot import emit_svg_boxplot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_DEGENERATE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfipmc",
        description="Likelihood-free inference experiments: classifier-weighted "
                    "PMC, ratio-estimation PMC, an exact-weight oracle and SMC ABC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("config", help="path to the experiment config")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out-dir", default=None, help="override the output directory")
    run_p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: available cores); results are "
                            "identical at any value")

    val_p = sub.add_parser("validate", help="parse and validate a config file")
    val_p.add_argument("config")

    plot_p = sub.add_parser("plot", help="re-plot a metrics.csv as boxplots")
    plot_p.add_argument("metrics", help="path to a metrics.csv")
    plot_p.add_argument("--out-dir", default=".", help="where to write the SVGs")
    return parser


def _write_error_record(out_dir: str | None, code: int, exc: Exception, context: str) -> None:
    target = Path(out_dir) if out_dir else Path(".")
    try:
        target.mkdir(parents=True, exist_ok=True)
        lines = [
            f"exit_code = {code}",
            f"error_type = {type(exc).__name__}",
            f"context = {context}",
        ]
        for i, line in enumerate(str(exc).splitlines() or [""]):
            lines.append(f"message_{i} = {line}")
        (target / "error.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError:
        pass  # error reporting must never mask the original failure


def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out_dir
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out_dir is not None:
            cfg.output_dir = args.out_dir
        if args.threads is not None:
            cfg.threads = args.threads
        out_dir = cfg.output_dir
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _write_error_record(out_dir, EXIT_CONFIG, exc, f"run {args.config}")
        return EXIT_CONFIG
    except DegenerateWeights as exc:
        print(f"degenerate weights: {exc}", file=sys.stderr)
        _write_error_record(out_dir, EXIT_DEGENERATE, exc, f"run {args.config}")
        return EXIT_DEGENERATE
    except (InferenceError, ValueError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        _write_error_record(out_dir, EXIT_RUNTIME, exc, f"run {args.config}")
        return EXIT_RUNTIME
    for path in result.files:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
    except (OSError, ConfigError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: kind={cfg.kind} seed={cfg.seed}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    try:
        rows = read_metrics_csv(args.metrics)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics = []
        for _, _, metric, _ in rows:
            if metric not in metrics and metric not in TIMING_METRICS:
                metrics.append(metric)
        for metric in metrics:
            methods = []
            for _, method, met, _ in rows:
                if met == metric and method not in methods:
                    methods.append(method)
            series = []
            for method in methods:
                values = [v for (_, m, k, v) in rows if m == method and k == metric]
                series.append((method, values))
            path = out_dir / f"{metric}_boxplot.svg"
            emit_svg_boxplot(series, path, title=metric, ylabel=metric)
            print(f"wrote {path}")
    except (OSError, ValueError, InferenceError) as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_plot(args)


if __name__ == "__main__":
    raise SystemExit(main())
