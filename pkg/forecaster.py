"""
h-step forecasting with AR error correction, and rolling-origin backtests.

At an origin n the model is trained on the first n observations only.
Covariates for the forecast rows are treated as known (exogenous); the
response beyond the origin is never read. Forecasts are

    y_hat[n+j] = x[n+j] . beta_hat + eps_hat[n+j],
    eps_hat[n+k] = sum_i phi_hat[i] * eps_hat[n+k-i],

with the recursion seeded from the in-sample residuals of the current fit.
"""

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from data import (
    ResponseTransform,
    ScalingParams,
    TimeSeriesDataset,
    build_lagged_design,
    inverse_transform,
    lag_orders,
    standardize,
    transform_response,
)
from errors import DataError, MissingValueError
from metrics import PredictionMetrics, metric_table, prediction_metrics
from output import round_sig, write_csv, write_json
from parallel import map_tasks
from run_logger import get_logger
from twostage import TwoStageConfig, TwoStageFit, fit_two_stage

logger = get_logger("forecaster")


@dataclass
class ForecastConfig:
    h: int = 1
    initial_window: Optional[int] = None
    refit_every: int = 1
    q_max: int = 10
    r: int = 1
    contemporaneous: bool = True
    transform: str = ResponseTransform.NONE.value
    two_stage: TwoStageConfig = field(default_factory=TwoStageConfig)
    workers: int = 1

    def __post_init__(self):
        if self.h < 1:
            raise ValueError(f"Horizon h must be at least 1, got {self.h}")
        if self.refit_every < 1:
            raise ValueError(f"refit_every must be at least 1, got {self.refit_every}")
        if self.initial_window is not None and self.initial_window < 1:
            raise ValueError(f"initial_window must be positive, got {self.initial_window}")
        ResponseTransform(self.transform)

    def resolve_window(self, n_obs: int) -> int:
        """T0, defaulting to floor(2N/3); T0 + h must not exceed N."""
        window = self.initial_window if self.initial_window is not None else (2 * n_obs) // 3
        if window + self.h > n_obs:
            raise DataError(
                f"Initial window {window} plus horizon {self.h} exceeds the series length N={n_obs}"
            )
        if window <= self.r:
            raise DataError(f"Initial window {window} leaves no rows after dropping r={self.r} lag rows")
        return window


@dataclass(frozen=True)
class ForecastResult:
    records: pd.DataFrame
    metrics: Dict[int, PredictionMetrics]
    metrics_transformed: Optional[Dict[int, PredictionMetrics]] = None
    metadata: Dict = field(default_factory=dict)

    @property
    def n_origins(self) -> int:
        return int(self.records["origin"].nunique())

    def metric_table(self, transformed: bool = False) -> pd.DataFrame:
        source = self.metrics_transformed if transformed else self.metrics
        if source is None:
            raise ValueError("No transformed-scale metrics: the run used no response transform")
        return metric_table(source)

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(self.records, path)

    def metrics_json(self, path: Optional[Union[str, Path]] = None) -> Dict:
        report = {
            "metadata": self.metadata,
            "original": {f"h={h}": m.as_dict() for h, m in sorted(self.metrics.items())},
        }
        if self.metrics_transformed is not None:
            report["transformed"] = {f"h={h}": m.as_dict() for h, m in sorted(self.metrics_transformed.items())}
        if path is not None:
            write_json(report, path)
        return round_sig(report)


def forecast_from_fit(
    fit: TwoStageFit, x_future: np.ndarray, eps_history: Sequence[float], h: Optional[int] = None
) -> np.ndarray:
    """Forecast h steps on the fit's (standardized) scale.

    ``x_future`` holds one design row per step; ``eps_history`` is ordered
    oldest to newest and zero-padded on the left when shorter than q.
    """
    x_future = np.atleast_2d(np.asarray(x_future, dtype=float))
    h = x_future.shape[0] if h is None else int(h)
    if h < 1:
        raise ValueError(f"Horizon must be at least 1, got {h}")
    if x_future.shape[0] < h:
        raise MissingValueError(f"Covariate rows for {h} steps are required, got {x_future.shape[0]}")
    if x_future.shape[1] != fit.beta_hat.size:
        raise ValueError(f"Design rows have {x_future.shape[1]} columns, the fit has {fit.beta_hat.size}")
    x_future = x_future[:h]
    if np.isnan(x_future).any():
        bad = sorted(set(np.flatnonzero(np.isnan(x_future).any(axis=1)).tolist()))
        raise MissingValueError(f"Missing covariate values in forecast steps {[b + 1 for b in bad]}")

    regression = x_future @ fit.beta_hat
    phi = fit.phi_hat.phi
    q = phi.size
    if q == 0:
        return regression

    history = np.asarray(eps_history, dtype=float).reshape(-1)[-q:]
    buffer = list(np.r_[np.zeros(q - history.size), history])
    corrections = np.empty(h)
    for k in range(h):
        value = sum(phi[i] * buffer[-1 - i] for i in range(q))
        corrections[k] = value
        buffer.append(value)
    return regression + corrections


def design_rows(ds: TimeSeriesDataset, rows: np.ndarray, r: int, contemporaneous: bool) -> np.ndarray:
    """Lag-expanded covariate rows, in the column order of build_lagged_design."""
    rows = np.asarray(rows, dtype=int)
    blocks = [ds.X[rows - lag, :] for lag in lag_orders(r, contemporaneous)]
    return np.hstack(blocks) if blocks else np.zeros((rows.size, 0))


def _fit_window(
    ds: TimeSeriesDataset, n: int, fc: ForecastConfig, block: int
) -> Tuple[TwoStageFit, ScalingParams]:
    problem = build_lagged_design(ds.head(n), fc.r, fc.contemporaneous)
    std_problem, scaling = standardize(problem)
    gibbs = replace(fc.two_stage.gibbs, stream=fc.two_stage.gibbs.stream + (block,))
    fit = fit_two_stage(std_problem, fc.q_max, replace(fc.two_stage, gibbs=gibbs))
    return fit, scaling


def _origin_records(
    ds_raw: TimeSeriesDataset,
    ds: TimeSeriesDataset,
    n: int,
    fit: TwoStageFit,
    scaling: ScalingParams,
    fc: ForecastConfig,
) -> List[Dict]:
    # residual history from the current fit over rows r..n-1
    past = np.arange(fc.r, n)
    X_past = scaling.transform_X(design_rows(ds, past, fc.r, fc.contemporaneous))
    resid = scaling.transform_y(ds.y[past]) - X_past @ fit.beta_hat
    eps_history = resid[-fit.q:] if fit.q else np.zeros(0)

    targets = np.arange(n, n + fc.h)
    x_future = scaling.transform_X(design_rows(ds, targets, fc.r, fc.contemporaneous))
    pred_std = forecast_from_fit(fit, x_future, eps_history)
    pred_model = scaling.inverse_y(pred_std)
    pred = inverse_transform(pred_model, fc.transform)

    transformed = ResponseTransform(fc.transform) is not ResponseTransform.NONE
    records = []
    for j, t in enumerate(targets, start=1):
        record = {
            "origin": n,
            "horizon": j,
            "timestamp": ds.timestamps[t] if ds.timestamps is not None else "",
            "actual": float(ds_raw.y[t]),
            "predicted": float(pred[j - 1]),
        }
        if transformed:
            record["actual_transformed"] = float(ds.y[t])
            record["predicted_transformed"] = float(pred_model[j - 1])
        records.append(record)
    return records


def _run_block(task: Tuple) -> Tuple[int, List[Dict]]:
    block, origins, ds_raw, ds, fc = task
    fit, scaling = _fit_window(ds, origins[0], fc, block)
    records = []
    for n in origins:
        records.extend(_origin_records(ds_raw, ds, n, fit, scaling, fc))
    logger.debug(f"Block {block}: origins {origins[0]}..{origins[-1]} done, |T_beta|={fit.t_beta.size}")
    return block, records


def _per_horizon(
    records: pd.DataFrame, h: int, actual: str, predicted: str, n_terms: int
) -> Dict[int, PredictionMetrics]:
    out = {}
    for j in range(1, h + 1):
        rows = records[records["horizon"] == j]
        out[j] = prediction_metrics(rows[actual].to_numpy(), rows[predicted].to_numpy(), n_terms=n_terms)
    return out


def rolling_backtest(ds: TimeSeriesDataset, fc: ForecastConfig) -> ForecastResult:
    """Rolling-origin evaluation over origins n = T0 .. N-h.

    Origins are grouped into blocks of ``refit_every``; each block fits once
    at its first origin with its own random stream and reuses that fit
    (and its frozen scaling) for the rest of the block.
    """
    if ds.has_missing:
        raise MissingValueError("Dataset has missing cells; interpolate before backtesting")
    N = ds.n_obs
    window = fc.resolve_window(N)
    origins = list(range(window, N - fc.h + 1))
    ds_model = ds.with_response(transform_response(ds.y, fc.transform))

    blocks = [origins[i : i + fc.refit_every] for i in range(0, len(origins), fc.refit_every)]
    logger.info(
        f"Backtest: N={N}, T0={window}, h={fc.h}, {len(origins)} origins, {len(blocks)} fits"
    )
    tasks = [(k, block, ds, ds_model, fc) for k, block in enumerate(blocks)]
    results = sorted(map_tasks(_run_block, tasks, fc.workers), key=lambda item: item[0])
    records = pd.DataFrame([rec for _, block_records in results for rec in block_records])

    n_terms = len(lag_orders(fc.r, fc.contemporaneous)) * ds.n_features
    metrics = _per_horizon(records, fc.h, "actual", "predicted", n_terms)
    metrics_t = None
    if ResponseTransform(fc.transform) is not ResponseTransform.NONE:
        metrics_t = _per_horizon(records, fc.h, "actual_transformed", "predicted_transformed", n_terms)

    metadata = {
        "n_obs": N,
        "initial_window": window,
        "horizon": fc.h,
        "refit_every": fc.refit_every,
        "n_origins": len(origins),
        "n_fits": len(blocks),
        "r": fc.r,
        "contemporaneous": fc.contemporaneous,
        "q_max": fc.q_max,
        "transform": fc.transform,
        "two_stage": asdict(fc.two_stage),
    }
    logger.info(f"Backtest complete: {len(records)} forecasts")
    return ForecastResult(records=records, metrics=metrics, metrics_transformed=metrics_t, metadata=metadata)
