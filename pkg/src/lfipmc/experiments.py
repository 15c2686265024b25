"""Experiment orchestration behind the CLI.

Each experiment kind runs deterministically from the config seed, writes
CSV metric tables, SVG charts and a plain-text manifest into the output
directory, and returns an in-memory result for programmatic use.

Wall-clock timings are recorded in the manifest only; CSV outputs carry
exclusively seed-determined values so repeated runs are byte-identical.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as rngmod
from .classifier import FitOptions
from .config import ExperimentConfig, serialize_config
from .evaluation import (
    ReplicateStudy,
    StudyResult,
    paired_t_statistic,
    rmse,
    run_replicate_study,
    student_t_pvalue_two_sided,
    write_metrics_csv,
    write_summary_csv,
)
from .models import BoxUniformPrior, GaussianModel, read_dataset_csv
from .samplers import (
    PmcConfig,
    SmcAbcConfig,
    run_pmc,
    run_smc_abc,
    write_generations_csv,
    write_records_csv,
)
from .svgplot import emit_svg_boxplot, emit_svg_density, emit_svg_lines
from .weighting import ExactOracle, LfireEstimator, MulticlassEstimator

#: metrics that hold wall-clock measurements; kept out of CSV outputs
TIMING_METRICS = ("fit_seconds", "wall_seconds")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    out_dir: Path
    files: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)

    def values(self, method: str, metric: str) -> np.ndarray:
        return np.array([v for (_, m, k, v) in self.rows if m == method and k == metric])


def fit_options_from(cfg: ExperimentConfig) -> FitOptions:
    return FitOptions(
        l1_strength=cfg.l1_strength,
        max_iterations=cfg.fit_iterations,
        tolerance=cfg.fit_tolerance,
        quadratic_features=cfg.quadratic_features,
    )


def build_estimator(cfg: ExperimentConfig, name: str):
    opts = fit_options_from(cfg)
    if name == "exact":
        return ExactOracle()
    if name == "mcpmc":
        return MulticlassEstimator(opts)
    if name == "lfire":
        return LfireEstimator(opts, cfg.marginal_sims or None)
    raise ValueError(f"no weight estimator named {name!r}")


def _pmc_config(cfg: ExperimentConfig, seed: int) -> PmcConfig:
    return PmcConfig(
        num_particles=cfg.pmc_particles,
        max_iterations=cfg.pmc_iterations,
        sims_per_particle=cfg.pmc_sims_per_particle,
        stop_window=cfg.stop_window,
        stop_threshold=cfg.stop_threshold if cfg.stop_threshold > 0 else None,
        seed=seed,
        threads=cfg.threads,
    )


def _smc_config(cfg: ExperimentConfig, seed: int) -> SmcAbcConfig:
    return SmcAbcConfig(
        num_particles=cfg.smc_particles,
        schedule=cfg.smc_schedule,
        max_attempts_per_particle=cfg.max_attempts,
        seed=seed,
        threads=cfg.threads,
    )


def _observed_for(cfg: ExperimentConfig, model: GaussianModel, replicate: int) -> np.ndarray:
    if cfg.observed:
        data = read_dataset_csv(cfg.observed)
        if data.shape[1] != model.dim_theta:
            raise ValueError(
                f"observed data has {data.shape[1]} columns, model expects {model.dim_theta}"
            )
        return data
    rng = rngmod.substream(cfg.seed, replicate, 0, "observation")
    return model.simulate(np.asarray(cfg.true_mean, dtype=float), 1, rng)


def _write_manifest(path: Path, cfg: ExperimentConfig, entries: dict) -> None:
    lines = [
        f"version = {__version__}",
        f"created_unix_ms = {int(time.time() * 1000)}",
        f"kind = {cfg.kind}",
        f"seed = {cfg.seed}",
    ]
    for key in sorted(entries):
        lines.append(f"{key} = {entries[key]}")
    lines.append("")
    lines.append("# config echo")
    for raw in serialize_config(cfg).splitlines():
        if raw:
            lines.append(f"config: {raw}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _pooled_final_mean(trace, window: int) -> np.ndarray:
    means = trace.weighted_means()
    take = min(window, len(means))
    return means[-take:].mean(axis=0)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Dispatch on the experiment kind; writes artifacts under cfg.output_dir."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = ExperimentResult(config=cfg, out_dir=out_dir)
    started = time.perf_counter()

    if cfg.kind == "single-run":
        _run_single(cfg, result)
    elif cfg.kind == "weight-comparison":
        _run_weight_comparison(cfg, result)
    elif cfg.kind == "pmc-convergence":
        _run_pmc_convergence(cfg, result)
    elif cfg.kind == "smc-vs-mcpmc":
        _run_smc_vs_mcpmc(cfg, result)
    else:
        raise ValueError(f"unknown experiment kind {cfg.kind!r}")

    result.manifest["wall_ms.total"] = int((time.perf_counter() - started) * 1000)
    _write_manifest(out_dir / "manifest.txt", cfg, result.manifest)
    result.files.append(str(out_dir / "manifest.txt"))
    return result


def _run_single(cfg: ExperimentConfig, result: ExperimentResult) -> None:
    model = GaussianModel(dim=len(cfg.true_mean))
    prior = BoxUniformPrior.cube(cfg.prior_lower, cfg.prior_upper, model.dim_theta)
    observed = _observed_for(cfg, model, 0)
    truth = np.asarray(cfg.true_mean, dtype=float)
    run_seed = rngmod.child_seed(cfg.seed, 0, 1)

    if cfg.estimator == "smc-abc":
        trace = run_smc_abc(model, prior, _smc_config(cfg, run_seed), observed, truth)
    else:
        estimator = build_estimator(cfg, cfg.estimator)
        trace = run_pmc(model, prior, estimator, _pmc_config(cfg, run_seed), observed, truth)
    result.traces[cfg.estimator] = trace

    gen_path = result.out_dir / "generations.csv"
    rec_path = result.out_dir / "records.csv"
    write_generations_csv(trace, gen_path)
    write_records_csv(trace, rec_path)
    result.files += [str(gen_path), str(rec_path)]

    iters = [rec.iteration for rec in trace.records]
    mse_series = [(cfg.estimator, [rec.mse_vs_observation for rec in trace.records])]
    svg_path = result.out_dir / "mse_by_iteration.svg"
    emit_svg_lines(iters, mse_series, svg_path, title="MSE vs observation by iteration",
                   xlabel="iteration", ylabel="mse")
    result.files.append(str(svg_path))

    for rec in trace.records:
        result.rows.append((0, cfg.estimator, f"mse_iter_{rec.iteration:02d}",
                            rec.mse_vs_observation))
        result.manifest[f"wall_ms.iteration_{rec.iteration}"] = rec.wall_ms
    result.manifest["total_simulator_calls"] = trace.total_simulator_calls
    result.manifest["stopped_at"] = trace.stopped_at
    result.manifest["estimator"] = cfg.estimator


def _run_weight_comparison(cfg: ExperimentConfig, result: ExperimentResult) -> None:
    all_rows = []
    kl_series = []
    fit_series = []
    for count in cfg.particle_counts:
        study = ReplicateStudy(
            num_datasets=cfg.replicates,
            num_particles=count,
            sims_per_particle=cfg.pmc_sims_per_particle,
            seed=rngmod.child_seed(cfg.seed, count),
            true_mean=cfg.true_mean,
            prior_low=cfg.prior_lower,
            prior_high=cfg.prior_upper,
            marginal_sims=cfg.marginal_sims or None,
            fit_options=fit_options_from(cfg),
            kl_direction=cfg.kl_direction,
            threads=cfg.threads,
        )
        study_result = run_replicate_study(study)
        for r, method, metric, value in study_result.rows:
            all_rows.append((r, f"{method}[n={count}]", metric, value))
        for method in ("mcpmc", "lfire"):
            kl_series.append((f"{method}[n={count}]", study_result.values(method, "kl")))
            fit_series.append((f"{method}[n={count}]", study_result.values(method, "fit_seconds")))
        t_stat, dof = paired_t_statistic(
            study_result.values("lfire", "kl"), study_result.values("mcpmc", "kl")
        )
        result.manifest[f"t_stat.n{count}"] = f"{t_stat:.6g}"
        result.manifest[f"t_dof.n{count}"] = dof
        result.manifest[f"p_two_sided.n{count}"] = (
            f"{student_t_pvalue_two_sided(t_stat, dof):.6g}"
        )
        for method in ("mcpmc", "lfire"):
            med = float(np.median(study_result.values(method, "kl")))
            result.manifest[f"median_kl.{method}.n{count}"] = f"{med:.6g}"
        for _r, method, message in study_result.failed:
            result.manifest[f"failed.{method}.n{count}"] = message

    result.rows = all_rows
    csv_rows = [row for row in all_rows if row[2] not in TIMING_METRICS]
    metrics_path = result.out_dir / "metrics.csv"
    write_metrics_csv(csv_rows, metrics_path)
    summary_path = result.out_dir / "summary.csv"
    write_summary_csv(StudyResult(rows=csv_rows, failed=[]).aggregate(), summary_path)
    kl_path = result.out_dir / "kl_boxplot.svg"
    emit_svg_boxplot(kl_series, kl_path, title="KL(exact, estimated weights)", ylabel="kl")
    fit_path = result.out_dir / "fit_seconds_boxplot.svg"
    emit_svg_boxplot(fit_series, fit_path, title="classifier fit time", ylabel="seconds")
    result.files += [str(metrics_path), str(summary_path), str(kl_path), str(fit_path)]


def _run_pmc_convergence(cfg: ExperimentConfig, result: ExperimentResult) -> None:
    model = GaussianModel(dim=len(cfg.true_mean))
    prior = BoxUniformPrior.cube(cfg.prior_lower, cfg.prior_upper, model.dim_theta)
    truth = np.asarray(cfg.true_mean, dtype=float)
    methods = ("exact", "mcpmc", "lfire")

    rows = []
    for r in range(cfg.replicates):
        observed = _observed_for(cfg, model, r)
        run_seed = rngmod.child_seed(cfg.seed, r, 1)
        for method in methods:
            estimator = build_estimator(cfg, method)
            trace = run_pmc(model, prior, estimator, _pmc_config(cfg, run_seed),
                            observed, truth)
            result.traces.setdefault(method, []).append(trace)
            for rec in trace.records:
                rows.append((r, method, f"mse_iter_{rec.iteration:02d}", rec.mse_vs_observation))
            rows.append((r, method, "final_mse", trace.records[-1].mse_vs_observation))
            rows.append((r, method, "first_mse", trace.records[0].mse_vs_observation))
            rows.append((r, method, "total_sims", float(trace.total_simulator_calls)))

    result.rows = rows
    metrics_path = result.out_dir / "metrics.csv"
    write_metrics_csv(rows, metrics_path)
    summary_path = result.out_dir / "summary.csv"
    write_summary_csv(StudyResult(rows=rows, failed=[]).aggregate(), summary_path)

    iters = list(range(1, cfg.pmc_iterations + 1))
    series = []
    for method in methods:
        medians = []
        for t in iters:
            vals = [v for (_, m, k, v) in rows if m == method and k == f"mse_iter_{t:02d}"]
            medians.append(float(np.median(vals)))
        series.append((method, medians))
        result.manifest[f"median_final_mse.{method}"] = f"{series[-1][1][-1]:.6g}"
    svg_path = result.out_dir / "mse_by_iteration.svg"
    emit_svg_lines(iters, series, svg_path, title="median MSE vs observation by iteration",
                   xlabel="iteration", ylabel="mse")
    result.files += [str(metrics_path), str(summary_path), str(svg_path)]


def _run_smc_vs_mcpmc(cfg: ExperimentConfig, result: ExperimentResult) -> None:
    model = GaussianModel(dim=len(cfg.true_mean))
    prior = BoxUniformPrior.cube(cfg.prior_lower, cfg.prior_upper, model.dim_theta)
    truth = np.asarray(cfg.true_mean, dtype=float)

    rows = []
    for r in range(cfg.replicates):
        observed = _observed_for(cfg, model, r)
        run_seed = rngmod.child_seed(cfg.seed, r, 1)

        estimator = build_estimator(cfg, "mcpmc")
        pmc_trace = run_pmc(model, prior, estimator, _pmc_config(cfg, run_seed),
                            observed, truth)
        result.traces.setdefault("mcpmc", []).append(pmc_trace)
        pooled = _pooled_final_mean(pmc_trace, cfg.stop_window)
        rows.append((r, "mcpmc", "rmse", rmse(pooled, truth)))
        rows.append((r, "mcpmc", "total_sims", float(pmc_trace.total_simulator_calls)))
        rows.append((r, "mcpmc", "iterations", float(pmc_trace.iterations)))

        smc_trace = run_smc_abc(model, prior, _smc_config(cfg, run_seed), observed, truth)
        result.traces.setdefault("smc-abc", []).append(smc_trace)
        rows.append((r, "smc-abc", "rmse", smc_trace.records[-1].rmse_vs_truth))
        rows.append((r, "smc-abc", "total_sims", float(smc_trace.total_simulator_calls)))
        rows.append((r, "smc-abc", "iterations", float(smc_trace.iterations)))

    result.rows = rows
    metrics_path = result.out_dir / "metrics.csv"
    write_metrics_csv(rows, metrics_path)
    summary_path = result.out_dir / "summary.csv"
    write_summary_csv(StudyResult(rows=rows, failed=[]).aggregate(), summary_path)

    rmse_series = [
        ("smc-abc", result_values(rows, "smc-abc", "rmse")),
        ("mcpmc", result_values(rows, "mcpmc", "rmse")),
    ]
    sims_series = [
        ("smc-abc", result_values(rows, "smc-abc", "total_sims")),
        ("mcpmc", result_values(rows, "mcpmc", "total_sims")),
    ]
    rmse_path = result.out_dir / "rmse_density.svg"
    emit_svg_density(rmse_series, rmse_path, title="RMSE vs true parameters", xlabel="rmse")
    sims_path = result.out_dir / "total_sims_density.svg"
    emit_svg_density(sims_series, sims_path, title="total simulator calls", xlabel="simulations")
    result.files += [str(metrics_path), str(summary_path), str(rmse_path), str(sims_path)]

    for method in ("mcpmc", "smc-abc"):
        for metric in ("rmse", "total_sims"):
            med = float(np.median(result_values(rows, method, metric)))
            result.manifest[f"median_{metric}.{method}"] = f"{med:.6g}"


def result_values(rows, method: str, metric: str) -> np.ndarray:
    return np.array([v for (_, m, k, v) in rows if m == method and k == metric])
