"""
Synthetic-data studies: selection accuracy over replicates and a
train/test prediction experiment.

Data: X rows are multivariate normal (identity covariance by default,
AR(1)-in-columns with ``column_rho``), eps follows AR(q) with Gaussian
shocks of sd sigma, and y = X beta* + eps. Replicate i draws its data
from stream (i,) of the scenario seed; its sampler runs on stream (i, 1).
"""

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from armodel import ar_shocks, build_A_matrix, require_stationary, unwhiten
from data import TimeSeriesDataset, build_lagged_design, standardize
from errors import DataError
from forecaster import ForecastConfig, ForecastResult, rolling_backtest
from metrics import ConfusionCounts, confusion
from output import package_versions, write_json
from parallel import map_tasks
from rng import make_rng
from run_logger import get_logger
from sampler import GibbsConfig
from twostage import TwoStageConfig, fit_two_stage

logger = get_logger("simharness")

DEFAULT_BETA = (3.0, -3.0, 1.0, -1.0, 0.5)
DEFAULT_PHI = (0.9, -0.9, 0.5, -0.5)
REL_THRESHOLD = 1e-3
COUNT_COLUMNS = ["TP", "FP", "FN", "TN", "Accuracy"]


def _padded(values: Sequence[float], length: int) -> Tuple[float, ...]:
    out = np.zeros(length)
    k = min(len(values), length)
    out[:k] = np.asarray(values, dtype=float)[:k]
    return tuple(float(v) for v in out)


@dataclass
class SimScenario:
    n_obs: int = 500
    p: int = 50
    q: int = 10
    sigma: float = 1.0
    reps: int = 10
    seed: int = 0
    beta_star: Optional[Tuple[float, ...]] = None
    phi_star: Optional[Tuple[float, ...]] = None
    column_rho: float = 0.0
    error_burn_in: int = 0
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    workers: int = 1

    def __post_init__(self):
        if self.n_obs < 2:
            raise ValueError(f"n_obs must be at least 2, got {self.n_obs}")
        if self.p < 1:
            raise ValueError(f"p must be at least 1, got {self.p}")
        if self.q < 0:
            raise ValueError(f"q must be non-negative, got {self.q}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if not -1.0 < self.column_rho < 1.0:
            raise ValueError(f"column_rho must lie in (-1, 1), got {self.column_rho}")

        beta = _padded(DEFAULT_BETA, self.p) if self.beta_star is None else tuple(map(float, self.beta_star))
        phi = _padded(DEFAULT_PHI, self.q) if self.phi_star is None else tuple(map(float, self.phi_star))
        if len(beta) != self.p:
            raise ValueError(f"beta_star has {len(beta)} entries, expected p={self.p}")
        if len(phi) != self.q:
            raise ValueError(f"phi_star has {len(phi)} entries, expected q={self.q}")
        require_stationary(phi, hint="choose a stationary phi_star for this q")
        self.beta_star = beta
        self.phi_star = phi


@dataclass(frozen=True)
class SyntheticTruth:
    beta_star: np.ndarray
    phi_star: np.ndarray
    eps: np.ndarray
    shocks: np.ndarray


class SelectionResult(NamedTuple):
    table: pd.DataFrame
    replicates: pd.DataFrame


class PredictionExperiment(NamedTuple):
    result: ForecastResult
    table: pd.DataFrame


def _column_covariance_factor(p: int, rho: float) -> np.ndarray:
    cov = linalg.toeplitz(rho ** np.arange(p))
    return linalg.cholesky(cov, lower=True)


def generate_synthetic(sc: SimScenario, rep_index: int = 0) -> Tuple[TimeSeriesDataset, SyntheticTruth]:
    rng = make_rng(sc.seed, rep_index)
    X = rng.standard_normal((sc.n_obs, sc.p))
    if sc.column_rho != 0.0:
        X = X @ _column_covariance_factor(sc.p, sc.column_rho).T

    total = sc.n_obs + sc.error_burn_in
    shocks = ar_shocks(sc.sigma, total, rng)
    eps = unwhiten(build_A_matrix(sc.phi_star, total), shocks)[sc.error_burn_in :]

    beta = np.asarray(sc.beta_star)
    y = X @ beta + eps
    ds = TimeSeriesDataset(y=y, X=X, feature_names=tuple(f"x{j + 1}" for j in range(sc.p)))
    truth = SyntheticTruth(beta_star=beta, phi_star=np.asarray(sc.phi_star), eps=eps, shocks=shocks[sc.error_burn_in :])
    return ds, truth


def _replicate_gibbs(sc: SimScenario, rep_index: int) -> GibbsConfig:
    return replace(sc.gibbs, seed=sc.seed, stream=(rep_index, 1))


def fit_replicate(sc: SimScenario, rep_index: int) -> Tuple[ConfusionCounts, Optional[ConfusionCounts]]:
    """Fit one replicate on its full data (no rolling) and score both supports."""
    ds, truth = generate_synthetic(sc, rep_index)
    problem, scaling = standardize(build_lagged_design(ds, r=0, include_contemporaneous=True))
    fit = fit_two_stage(problem, sc.q, TwoStageConfig(q_max=sc.q, gibbs=_replicate_gibbs(sc, rep_index)))

    beta_counts = confusion(scaling.unscale_coefficients(fit.beta_hat), truth.beta_star, REL_THRESHOLD)
    phi_counts = None
    if np.any(truth.phi_star != 0):
        phi_counts = confusion(fit.phi_hat.phi, truth.phi_star, REL_THRESHOLD)
    return beta_counts, phi_counts


def _selection_worker(task: Tuple[SimScenario, int]) -> Tuple[int, ConfusionCounts, Optional[ConfusionCounts]]:
    sc, rep = task
    beta_counts, phi_counts = fit_replicate(sc, rep)
    logger.debug(f"Replicate {rep}: beta accuracy {beta_counts.accuracy:.3f}")
    return rep, beta_counts, phi_counts


def run_selection_experiment(sc: SimScenario, replicates: Optional[Iterable[int]] = None) -> SelectionResult:
    """Mean TP/FP/FN/TN/accuracy for beta and phi across replicates."""
    reps = list(range(sc.reps)) if replicates is None else list(replicates)
    logger.info(f"Selection experiment: N={sc.n_obs}, p={sc.p}, q={sc.q}, sigma={sc.sigma}, {len(reps)} replicates")
    outcomes = sorted(map_tasks(_selection_worker, [(sc, rep) for rep in reps], sc.workers), key=lambda o: o[0])

    rows = []
    for rep, beta_counts, phi_counts in outcomes:
        for target, counts in (("beta", beta_counts), ("phi", phi_counts)):
            if counts is None:
                continue
            rows.append({"rep": rep, "target": target, "TP": counts.tp, "FP": counts.fp,
                         "FN": counts.fn, "TN": counts.tn, "Accuracy": counts.accuracy})
    per_rep = pd.DataFrame(rows, columns=["rep", "target", *COUNT_COLUMNS])

    means = per_rep.groupby("target", sort=False)[COUNT_COLUMNS].mean().reset_index()
    table = means.assign(q=sc.q, sigma=sc.sigma, p=sc.p, n_obs=sc.n_obs, reps=len(reps))
    table = table[["target", "q", "sigma", "p", "n_obs", "reps", *COUNT_COLUMNS]]
    for _, row in table.iterrows():
        logger.info(f"  {row['target']}: TP={row['TP']:.2f} FP={row['FP']:.2f} accuracy={row['Accuracy']:.3f}")
    return SelectionResult(table=table, replicates=per_rep)


def run_selection_grid(
    base: SimScenario, ps: Sequence[int], qs: Sequence[int], sigmas: Sequence[float]
) -> pd.DataFrame:
    """Long-format table over the (q, sigma, p) grid."""
    tables = []
    for q in qs:
        for sigma in sigmas:
            for p in ps:
                sc = replace(base, p=p, q=q, sigma=sigma, beta_star=None, phi_star=None)
                tables.append(run_selection_experiment(sc).table)
    return pd.concat(tables, ignore_index=True)


def selection_table_wide(long_table: pd.DataFrame, target: str = "beta") -> pd.DataFrame:
    """One row per (q, sigma), one "p=<p>" column of "TP, FP, FN, TN, Accuracy" cells."""
    subset = long_table[long_table["target"] == target].copy()
    subset["cell"] = subset[COUNT_COLUMNS].apply(
        lambda r: ", ".join(f"{v:.2f}" for v in r.to_numpy(dtype=float)), axis=1
    )
    subset["column"] = "p=" + subset["p"].astype(str)
    wide = subset.pivot_table(index=["q", "sigma"], columns="column", values="cell", aggfunc="first", sort=False)
    wide.columns.name = None
    return wide.reset_index()


def run_prediction_experiment(
    sc: SimScenario,
    train_n: int = 800,
    horizons: Sequence[int] = (1, 2, 3, 4, 5),
    refit_every: Optional[int] = None,
) -> PredictionExperiment:
    """Fit on the first train_n points and forecast the rest at each horizon.

    With ``refit_every`` left as None the model is fitted once.
    """
    horizons = sorted(set(int(h) for h in horizons))
    if not horizons or horizons[0] < 1:
        raise ValueError(f"Horizons must be positive integers, got {horizons}")
    if train_n + horizons[-1] > sc.n_obs:
        raise DataError(f"train_n={train_n} plus horizon {horizons[-1]} exceeds N={sc.n_obs}")

    ds, _ = generate_synthetic(sc, 0)
    fc = ForecastConfig(
        h=horizons[-1],
        initial_window=train_n,
        refit_every=refit_every or sc.n_obs,
        q_max=sc.q,
        r=0,
        contemporaneous=True,
        two_stage=TwoStageConfig(q_max=sc.q, gibbs=_replicate_gibbs(sc, 0)),
        workers=sc.workers,
    )
    result = rolling_backtest(ds, fc)
    table = result.metric_table()
    table = table[["Metric", *[f"h={h}" for h in horizons]]]
    return PredictionExperiment(result=result, table=table)


def write_manifest(path: Union[str, Path], sc: SimScenario, extra: Optional[Dict] = None) -> Path:
    manifest = {
        "scenario": asdict(sc),
        "replicate_streams": {"data": [[i] for i in range(sc.reps)], "sampler": [[i, 1] for i in range(sc.reps)]},
        "versions": package_versions(),
    }
    if extra:
        manifest.update(extra)
    return write_json(manifest, path)
