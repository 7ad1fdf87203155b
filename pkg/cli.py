#!/usr/bin/env python3
"""
spikeslab-ar command line.

Commands:
- simulate: selection-accuracy tables or the train/test prediction experiment
- fit: two-stage fit of a CSV series, written as a JSON report
- backtest: rolling-origin forecasts with per-horizon metric tables

Every successful command writes a manifest.json next to its outputs; passing
that file to --from-manifest reruns the command with the same arguments.
Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 data error,
4 numeric failure, 130 interrupted.
"""

import argparse
import hashlib
import json
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from data import (
    LoadConfig,
    ResponseTransform,
    TimeSeriesDataset,
    build_lagged_design,
    load_csv,
    standardize,
    transform_response,
)
from errors import SpikeSlabError, UsageError
from forecaster import ForecastConfig, rolling_backtest
from output import package_versions, write_csv, write_json
from parallel import default_workers
from posterior import correlation_ratio_diagnostic, gram_eigen_diagnostic
from run_logger import RunLogger
from sampler import GibbsConfig
from simharness import (
    SimScenario,
    run_prediction_experiment,
    run_selection_experiment,
    selection_table_wide,
)
from twostage import TwoStageConfig, fit_two_stage

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    config: Dict
    seed: int
    versions: Dict[str, str] = field(default_factory=package_versions)
    input_digests: Dict[str, str] = field(default_factory=dict)
    timing: Dict[str, object] = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        return write_json(asdict(self), out_dir / MANIFEST_NAME)


def file_digest(path: Path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def _csv_list(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    items = [item.strip() for item in text.split(",") if item.strip()]
    return items or None


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--out", default="results", help="Output directory (default: results)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    parser.add_argument("--iterations", type=int, default=5000, help="Gibbs iterations (default: 5000)")
    parser.add_argument("--burn-in", type=int, default=1000, help="Gibbs burn-in (default: 1000)")
    parser.add_argument(
        "--threads", type=int, default=None, help="Worker processes (default: $SPIKESLAB_THREADS or 1)"
    )
    parser.add_argument("--log-file", default=None, help="Also write a DEBUG log to this file")
    parser.add_argument("--verbose", action="store_true", help="DEBUG output on the console")


def _add_data_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--data", required=True, help="Input CSV with a header row")
    parser.add_argument("--target", required=True, help="Response column")
    parser.add_argument("--features", default=None, help="Comma-separated covariate columns (default: all others)")
    parser.add_argument("--time-column", default=None, help="Timestamp column carried into outputs")
    parser.add_argument("--lags", type=int, default=1, help="Covariate lag count r (default: 1)")
    parser.add_argument("--error-lags", type=int, default=10, help="Maximum AR error lag q (default: 10)")
    parser.add_argument(
        "--no-contemporaneous", action="store_true", help="Use lags 1..r only, without same-time covariates"
    )
    parser.add_argument(
        "--transform", choices=[t.value for t in ResponseTransform], default="none", help="Response transform"
    )
    parser.add_argument("--no-interpolate", action="store_true", help="Fail on missing cells instead of filling")
    parser.add_argument("--refine", action="store_true", help="One extra pass on data whitened by A(phi_hat)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeslab-ar",
        description="Spike-and-slab selection for regression with lagged covariates and AR errors",
    )
    parser.add_argument("--from-manifest", default=None, help="Rerun the command recorded in a manifest.json")
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="Synthetic selection or prediction study")
    _add_common_flags(sim)
    sim.add_argument("--experiment", choices=["selection", "prediction"], default="selection")
    sim.add_argument("--n", type=int, default=None, help="Series length N (default: 500, prediction: 1000)")
    sim.add_argument("--p", type=int, default=50, help="Covariate count (default: 50)")
    sim.add_argument("--q", type=int, default=10, help="Error lag count (default: 10)")
    sim.add_argument("--sigma", type=float, default=1.0, help="Shock standard deviation (default: 1)")
    sim.add_argument("--reps", type=int, default=10, help="Replicates (default: 10)")
    sim.add_argument("--column-rho", type=float, default=0.0, help="AR(1) correlation between columns of X")
    sim.add_argument("--train-n", type=int, default=800, help="Training length for --experiment prediction")
    sim.add_argument("--horizon", type=int, default=5, help="Largest horizon for --experiment prediction")
    sim.add_argument("--refit-every", type=int, default=None, help="Refit cadence (default: fit once)")

    fit = sub.add_parser("fit", help="Two-stage fit of a CSV series")
    _add_common_flags(fit)
    _add_data_flags(fit)

    bt = sub.add_parser("backtest", help="Rolling-origin forecast evaluation")
    _add_common_flags(bt)
    _add_data_flags(bt)
    bt.add_argument("--horizon", type=int, default=1, help="Forecast horizon h (default: 1)")
    bt.add_argument("--initial-window", type=int, default=None, help="Initial training length (default: 2N/3)")
    bt.add_argument("--refit-every", type=int, default=1, help="Refit cadence in steps (default: 1)")
    return parser


def _gibbs_config(args) -> GibbsConfig:
    return GibbsConfig(iterations=args.iterations, burn_in=args.burn_in, seed=args.seed)


def _workers(args) -> int:
    return default_workers() if args.threads is None else max(args.threads, 1)


@contextmanager
def usage_errors():
    """Report invalid flag values as usage errors (exit code 2)."""
    try:
        yield
    except ValueError as e:
        raise UsageError(str(e)) from e


def _load_dataset(args) -> TimeSeriesDataset:
    with usage_errors():
        load_cfg = LoadConfig(
            target=args.target,
            features=_csv_list(args.features),
            r=args.lags,
            contemporaneous=not args.no_contemporaneous,
            transform=args.transform,
            time_column=args.time_column,
            interpolate=not args.no_interpolate,
        )
    ds = load_csv(args.data, load_cfg.target, load_cfg.features, load_cfg.time_column)
    if load_cfg.interpolate:
        ds = ds.interpolated()
    return ds


def cmd_simulate(args, log: RunLogger) -> Dict:
    n_obs = args.n if args.n is not None else (1000 if args.experiment == "prediction" else 500)
    with usage_errors():
        sc = SimScenario(
            n_obs=n_obs,
            p=args.p,
            q=args.q,
            sigma=args.sigma,
            reps=args.reps,
            seed=args.seed,
            column_rho=args.column_rho,
            gibbs=_gibbs_config(args),
            workers=_workers(args),
        )

    out = Path(args.out)
    if args.experiment == "selection":
        result = run_selection_experiment(sc)
        outputs = {"selection_table.csv": result.table, "selection_replicates.csv": result.replicates}
        for target in result.table["target"].unique():
            outputs[f"selection_{target}_wide.csv"] = selection_table_wide(result.table, target)
        summary = {
            f"{row['target']} accuracy": f"{row['Accuracy']:.3f} (TP {row['TP']:.2f}, FP {row['FP']:.2f})"
            for _, row in result.table.iterrows()
        }
    else:
        with usage_errors():
            horizons = range(1, args.horizon + 1)
            if not horizons:
                raise ValueError(f"--horizon must be at least 1, got {args.horizon}")
        experiment = run_prediction_experiment(
            sc, train_n=args.train_n, horizons=horizons, refit_every=args.refit_every
        )
        outputs = {
            "prediction_metrics.csv": experiment.table,
            "prediction_forecasts.csv": experiment.result.records,
        }
        summary = {"Forecasts": len(experiment.result.records)}

    for name, frame in outputs.items():
        write_csv(frame, out / name)
        log.info(f"Saved {name} to: {out}")
    return {"config": asdict(sc), "summary": {**summary, "Output": str(out.absolute())}, "inputs": []}


def cmd_fit(args, log: RunLogger) -> Dict:
    with usage_errors():
        ts_cfg = TwoStageConfig(q_max=args.error_lags, gibbs=_gibbs_config(args), refine=args.refine)
    ds = _load_dataset(args)
    if args.transform != ResponseTransform.NONE.value:
        ds = ds.with_response(transform_response(ds.y, args.transform))

    problem, scaling = standardize(build_lagged_design(ds, args.lags, not args.no_contemporaneous))
    fit = fit_two_stage(problem, args.error_lags, ts_cfg)

    report = fit.report()
    lo, hi = gram_eigen_diagnostic(problem.X, fit.phi_hat)
    report["data"] = {
        "source": str(args.data),
        "target": ds.target_name,
        "features": list(ds.feature_names),
        "N": ds.n_obs,
        "r": args.lags,
        "contemporaneous": not args.no_contemporaneous,
        "transform": args.transform,
    }
    report["diagnostics"] = {
        "gram_min_eigenvalue": lo,
        "gram_max_eigenvalue": hi,
        "correlation_ratio": correlation_ratio_diagnostic(problem.X, fit.t_beta),
    }
    selected = set(fit.t_beta.tolist())
    inclusion = pd.DataFrame(
        {
            "column": problem.labels,
            "feature": [name for name, _ in problem.column_labels],
            "lag": [lag for _, lag in problem.column_labels],
            "inclusion_probability": fit.stage1.incl_prob,
            "selected": [j in selected for j in range(problem.p)],
            "beta_standardized": fit.beta_hat,
            "beta_original_units": scaling.unscale_coefficients(fit.beta_hat),
        }
    ).sort_values("inclusion_probability", ascending=False, kind="mergesort")

    out = Path(args.out)
    write_json(report, out / "fit_report.json")
    write_csv(inclusion, out / "inclusion_probabilities.csv")
    log.info(f"Saved fit report to: {out / 'fit_report.json'}")
    summary = {
        "Selected columns": ", ".join(row["column"] for row in report["t_beta"]) or "(none)",
        "Selected error lags": report["t_phi"] or "(none)",
        "Output": str(out.absolute()),
    }
    return {"config": asdict(ts_cfg), "summary": summary, "inputs": [args.data]}


def cmd_backtest(args, log: RunLogger) -> Dict:
    with usage_errors():
        fc = ForecastConfig(
            h=args.horizon,
            initial_window=args.initial_window,
            refit_every=args.refit_every,
            q_max=args.error_lags,
            r=args.lags,
            contemporaneous=not args.no_contemporaneous,
            transform=args.transform,
            two_stage=TwoStageConfig(q_max=args.error_lags, gibbs=_gibbs_config(args), refine=args.refine),
            workers=_workers(args),
        )

    ds = _load_dataset(args)
    result = rolling_backtest(ds, fc)

    out = Path(args.out)
    result.to_csv(out / "backtest_forecasts.csv")
    write_csv(result.metric_table(), out / "backtest_metrics.csv")
    if result.metrics_transformed is not None:
        write_csv(result.metric_table(transformed=True), out / "backtest_metrics_transformed.csv")
    result.metrics_json(out / "backtest_metrics.json")
    log.info(f"Saved forecasts and metric tables to: {out}")

    summary = {
        "Origins": result.metadata["n_origins"],
        "Fits": result.metadata["n_fits"],
        "MSE (h=1)": f"{result.metrics[1].mse:.6g}",
        "Output": str(out.absolute()),
    }
    return {"config": asdict(fc), "summary": summary, "inputs": [args.data]}


COMMANDS: Dict[str, Callable] = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "backtest": cmd_backtest,
}


def _argv_from_manifest(path: str) -> Tuple[List[str], Dict[str, str]]:
    """Recorded argv and input digests of a saved manifest."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        return [str(a) for a in manifest["argv"]], dict(manifest.get("input_digests") or {})
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise UsageError(f"Cannot read manifest {path}: {e}") from e


def changed_inputs(digests: Dict[str, str]) -> List[str]:
    """Recorded inputs that still exist but no longer match their digest."""
    return [p for p, digest in digests.items() if Path(p).is_file() and file_digest(Path(p)) != digest]


def run(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.from_manifest:
        try:
            replay, digests = _argv_from_manifest(args.from_manifest)
        except UsageError as e:
            RunLogger().error(str(e))
            return e.exit_code
        for path in changed_inputs(digests):
            RunLogger().warning(f"Input {path} changed since the manifest was written; results may differ")
        return run(replay)

    if args.command is None:
        parser.print_help()
        return UsageError.exit_code

    log = RunLogger(log_file=args.log_file, verbose=args.verbose)
    log.info(f"spikeslab-ar {args.command} started")
    started = datetime.now()
    t0 = time.perf_counter()

    try:
        outcome = COMMANDS[args.command](args, log)
        out = Path(args.out)
        manifest = RunManifest(
            command=args.command,
            argv=list(argv),
            config=outcome["config"],
            seed=args.seed,
            input_digests={str(p): file_digest(Path(p)) for p in outcome["inputs"]},
            timing={
                "started": started.isoformat(timespec="seconds"),
                "seconds": round(time.perf_counter() - t0, 3),
            },
        )
        manifest.write(out)
    except SpikeSlabError as e:
        log.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        log.info("Run interrupted by user")
        return 130
    except Exception as e:
        log.error(f"Unexpected error: {type(e).__name__}: {e}")
        return SpikeSlabError.exit_code

    log.banner(f"{args.command.upper()} SUMMARY", {**outcome["summary"], "Duration": manifest.timing["seconds"]})
    return 0


def main() -> int:
    """Main entry point"""
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
