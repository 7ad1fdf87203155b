"""
Dataset ingestion and design-matrix preparation.

Features:
- CSV loading with per-cell diagnostics (row and column of bad cells)
- Linear interpolation of interior gaps
- Lag expansion of covariates into a regression design
- Column standardization (sum 0, squared norm n) with invertible scaling
- The log(-y+1) response transform used for depth-below-surface series
"""

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import (
    ConstantColumnError,
    DataError,
    MissingColumnError,
    MissingValueError,
    NonNumericCellError,
)
from run_logger import get_logger

logger = get_logger("data")

MISSING_TOKENS = {"", "NA", "NaN", "nan"}


class ResponseTransform(Enum):
    NONE = "none"
    LOG_NEG = "log-neg"


def _frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeriesDataset:
    y: np.ndarray
    X: np.ndarray
    feature_names: Tuple[str, ...]
    target_name: str = "y"
    timestamps: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        y = _frozen(self.y, 1).reshape(-1)
        y.setflags(write=False)
        X = _frozen(self.X, 2)
        if X.shape[0] != y.shape[0]:
            if X.size == 0 and len(self.feature_names) == 0:
                X = np.zeros((y.shape[0], 0))
                X.setflags(write=False)
            else:
                raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        names = tuple(self.feature_names)
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValueError(f"Feature names must be unique: {names}")
        stamps = self.timestamps
        if stamps is not None:
            stamps = tuple(str(s) for s in stamps)
            if len(stamps) != y.shape[0]:
                raise ValueError(f"{len(stamps)} timestamps for {y.shape[0]} observations")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "timestamps", stamps)

    @property
    def n_obs(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.X.shape[1])

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.y).any() or np.isnan(self.X).any())

    def head(self, n: int) -> "TimeSeriesDataset":
        """First ``n`` observations."""
        stamps = None if self.timestamps is None else self.timestamps[:n]
        return replace(self, y=self.y[:n], X=self.X[:n], timestamps=stamps)

    def with_response(self, y: np.ndarray) -> "TimeSeriesDataset":
        return replace(self, y=y)

    def interpolated(self) -> "TimeSeriesDataset":
        """Fill interior gaps in the response and every covariate."""
        if not self.has_missing:
            return self
        y = interpolate_missing(self.y, name=self.target_name)
        X = np.column_stack(
            [interpolate_missing(self.X[:, k], name=name) for k, name in enumerate(self.feature_names)]
        ) if self.n_features else self.X
        return replace(self, y=y, X=X)


@dataclass(frozen=True)
class ScalingParams:
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float

    def __post_init__(self):
        if np.any(np.asarray(self.x_scale) <= 0) or self.y_scale <= 0:
            raise ValueError("Scaling factors must be strictly positive")

    def transform_X(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def inverse_y(self, y_std: np.ndarray) -> np.ndarray:
        return np.asarray(y_std, dtype=float) * self.y_scale + self.y_mean

    def unscale_coefficients(self, beta_std: np.ndarray) -> np.ndarray:
        """Coefficients of the standardized regression expressed in original units."""
        return np.asarray(beta_std, dtype=float) * self.y_scale / self.x_scale


@dataclass(frozen=True)
class LaggedRegressionProblem:
    y: np.ndarray
    X: np.ndarray
    column_labels: Tuple[Tuple[str, int], ...]
    r: int
    include_contemporaneous: bool = True
    scaling: Optional[ScalingParams] = None
    row_index: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    @property
    def standardized(self) -> bool:
        return self.scaling is not None

    @property
    def labels(self) -> List[str]:
        return [f"{name}_{lag}" for name, lag in self.column_labels]


@dataclass
class LoadConfig:
    target: str
    features: Optional[List[str]] = None
    r: int = 1
    contemporaneous: bool = True
    transform: str = ResponseTransform.NONE.value
    time_column: Optional[str] = None
    interpolate: bool = True

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"r must be non-negative, got {self.r}")
        lag_orders(self.r, self.contemporaneous)
        ResponseTransform(self.transform)


def _parse_numeric(raw: pd.Series, column: str) -> np.ndarray:
    text = raw.astype(str).str.strip()
    missing = text.isin(MISSING_TOKENS)
    values = pd.to_numeric(text.where(~missing), errors="coerce")
    bad = values.isna() & ~missing
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise NonNumericCellError(row=row + 1, column=column, value=raw.iloc[row])
    return values.to_numpy(dtype=float)


def load_csv(
    path: Union[str, Path],
    target: str,
    features: Optional[Sequence[str]] = None,
    time_column: Optional[str] = None,
) -> TimeSeriesDataset:
    """Read a headered CSV into a dataset.

    Empty cells become NaN (absent), never zero. When ``features`` is None
    every column other than the target and the time column is used.
    Row numbers in diagnostics are 1-based data rows (the header is row 0).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Data file not found: {path}")

    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    columns = list(frame.columns)

    if features is None:
        features = [c for c in columns if c not in (target, time_column)]
    wanted = [target, *features] + ([time_column] if time_column else [])
    missing_cols = [c for c in wanted if c not in columns]
    if missing_cols:
        raise MissingColumnError(missing_cols, source=str(path))

    y = _parse_numeric(frame[target], target)
    if features:
        X = np.column_stack([_parse_numeric(frame[c], c) for c in features])
    else:
        X = np.zeros((len(frame), 0))
    stamps = tuple(frame[time_column].astype(str)) if time_column else None

    ds = TimeSeriesDataset(y=y, X=X, feature_names=tuple(features), target_name=target, timestamps=stamps)
    n_missing = int(np.isnan(y).sum() + np.isnan(X).sum())
    logger.info(f"Loaded {path.name}: N={ds.n_obs}, p0={ds.n_features}, missing cells={n_missing}")
    return ds


def interpolate_missing(series: np.ndarray, name: str = "series") -> np.ndarray:
    """Fill NaN gaps linearly between the nearest present neighbours.

    Leading or trailing gaps are an error; there is no extrapolation.
    """
    values = np.asarray(series, dtype=float)
    if values.size == 0:
        return values.copy()
    if np.isnan(values[0]) or np.isnan(values[-1]):
        raise MissingValueError(
            f"Cannot interpolate '{name}': first and last values must be present (no extrapolation)"
        )
    if not np.isnan(values).any():
        return values.copy()
    return pd.Series(values).interpolate(method="linear", limit_area="inside").to_numpy(dtype=float)


def lag_orders(r: int, include_contemporaneous: bool) -> List[int]:
    """Lags used for each covariate.

    With the contemporaneous flag the lags are 0..r-1 (r=0 keeps lag 0 only);
    without it they are 1..r.
    """
    if include_contemporaneous:
        return list(range(max(r, 1)))
    if r == 0:
        raise ValueError("r=0 without contemporaneous covariates leaves no columns")
    return list(range(1, r + 1))


def build_lagged_design(
    ds: TimeSeriesDataset, r: int, include_contemporaneous: bool = True
) -> LaggedRegressionProblem:
    """Expand covariates into lag columns; the first r rows are dropped.

    Columns are ordered lag-major: every feature at the smallest lag, then
    every feature at the next lag, and so on.
    """
    if r < 0:
        raise ValueError(f"r must be non-negative, got {r}")
    if r >= ds.n_obs:
        raise DataError(f"Lag count r={r} must be smaller than the series length N={ds.n_obs}")
    if ds.has_missing:
        raise MissingValueError("Dataset has missing cells; interpolate before building the design")

    lags = lag_orders(r, include_contemporaneous)
    rows = np.arange(r, ds.n_obs)
    blocks = [ds.X[rows - lag, :] for lag in lags]
    X_lag = np.hstack(blocks) if blocks else np.zeros((rows.size, 0))
    labels = tuple((name, lag) for lag in lags for name in ds.feature_names)

    return LaggedRegressionProblem(
        y=ds.y[rows].copy(),
        X=X_lag,
        column_labels=labels,
        r=r,
        include_contemporaneous=include_contemporaneous,
        scaling=None,
        row_index=rows,
    )


def fit_scaling(y: np.ndarray, X: np.ndarray, labels: Optional[Sequence[str]] = None) -> ScalingParams:
    """Column means and population standard deviations."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    labels = list(labels) if labels is not None else [f"x{k}" for k in range(X.shape[1])]

    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    for k, scale in enumerate(x_scale):
        if scale <= 1e-12 * max(1.0, abs(x_mean[k])):
            raise ConstantColumnError(labels[k])

    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale <= 1e-12 * max(1.0, abs(y_mean)):
        raise ConstantColumnError("response")

    return ScalingParams(x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale)


def apply_scaling(params: ScalingParams, y: np.ndarray, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return params.transform_y(y), params.transform_X(X)


def standardize(problem: LaggedRegressionProblem) -> Tuple[LaggedRegressionProblem, ScalingParams]:
    """Center every column and y to sum 0 and scale to squared norm n."""
    params = fit_scaling(problem.y, problem.X, problem.labels)
    y_std, X_std = apply_scaling(params, problem.y, problem.X)
    return replace(problem, y=y_std, X=X_std, scaling=params), params


def _check_log_neg_domain(y: np.ndarray):
    bad = np.flatnonzero(y > 0)
    if bad.size:
        shown = ", ".join(str(i) for i in bad[:20])
        more = f" (+{bad.size - 20} more)" if bad.size > 20 else ""
        raise DataError(f"log-neg transform requires y <= 0; positive values at indices {shown}{more}")


def transform_response(y: np.ndarray, kind: Union[str, ResponseTransform]) -> np.ndarray:
    """Apply log(-y+1) (``log-neg``) or the identity (``none``)."""
    kind = ResponseTransform(kind)
    y = np.asarray(y, dtype=float)
    if kind is ResponseTransform.NONE:
        return y.copy()
    _check_log_neg_domain(y)
    return np.log1p(-y)


def inverse_transform(y_prime: np.ndarray, kind: Union[str, ResponseTransform]) -> np.ndarray:
    kind = ResponseTransform(kind)
    y_prime = np.asarray(y_prime, dtype=float)
    if kind is ResponseTransform.NONE:
        return y_prime.copy()
    return -np.expm1(y_prime)
