"""Selection and prediction accuracy metrics."""

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else float("nan")

    def as_dict(self) -> Dict[str, float]:
        return {**asdict(self), "accuracy": self.accuracy}


@dataclass(frozen=True)
class PredictionMetrics:
    me: float
    mae: float
    mse: float
    nrmse: Optional[float]
    r: Optional[float]
    r2: Optional[float]
    r2_adj: Optional[float] = None

    @property
    def nrmse_percent(self) -> Optional[float]:
        return None if self.nrmse is None else 100.0 * self.nrmse

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {
            "ME": self.me,
            "MAE": self.mae,
            "MSE": self.mse,
            "NRMSE(%)": self.nrmse_percent,
            "r": self.r,
            "R2": self.r2,
            "R2_adj": self.r2_adj,
        }


def confusion(estimated: np.ndarray, truth: np.ndarray, rel_threshold: float = 1e-3) -> ConfusionCounts:
    """Count selections against the true support.

    estimated_j counts as nonzero when |estimated_j| exceeds rel_threshold
    times the smallest nonzero |truth_k|.
    """
    estimated = np.asarray(estimated, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if estimated.shape != truth.shape:
        raise ValueError(f"Length mismatch: {estimated.size} estimates, {truth.size} true values")
    true_nonzero = truth != 0
    if not true_nonzero.any():
        raise ValueError("Relative threshold needs at least one nonzero true coefficient")

    cutoff = rel_threshold * float(np.min(np.abs(truth[true_nonzero])))
    est_nonzero = np.abs(estimated) > cutoff
    return ConfusionCounts(
        tp=int(np.sum(est_nonzero & true_nonzero)),
        fp=int(np.sum(est_nonzero & ~true_nonzero)),
        fn=int(np.sum(~est_nonzero & true_nonzero)),
        tn=int(np.sum(~est_nonzero & ~true_nonzero)),
    )


def prediction_metrics(
    actual: np.ndarray, predicted: np.ndarray, n_terms: Optional[int] = None
) -> PredictionMetrics:
    """ME, MAE, MSE, NRMSE, Pearson r and R^2 (TSS centred on mean(actual)).

    NRMSE is absent when actual has zero range; r and R^2 are absent when
    actual is constant. With ``n_terms`` the adjusted R^2 is added.
    """
    actual = np.asarray(actual, dtype=float).reshape(-1)
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    if actual.shape != predicted.shape:
        raise ValueError(f"Length mismatch: {actual.size} actual, {predicted.size} predicted")
    if actual.size == 0:
        raise ValueError("Need at least one observation")

    err = actual - predicted
    me = float(err.mean())
    mae = float(np.abs(err).mean())
    mse = float((err * err).mean())

    span = float(actual.max() - actual.min())
    nrmse = math.sqrt(mse) / span if span > 0 else None

    centred = actual - actual.mean()
    tss = float(centred @ centred)
    if tss <= 0:
        return PredictionMetrics(me=me, mae=mae, mse=mse, nrmse=nrmse, r=None, r2=None)

    r2 = 1.0 - float(err @ err) / tss
    pred_centred = predicted - predicted.mean()
    pred_ss = float(pred_centred @ pred_centred)
    r = float(centred @ pred_centred) / math.sqrt(tss * pred_ss) if pred_ss > 0 else None

    r2_adj = None
    m = actual.size
    if n_terms is not None and m - n_terms - 1 > 0:
        r2_adj = 1.0 - (1.0 - r2) * (m - 1) / (m - n_terms - 1)
    return PredictionMetrics(me=me, mae=mae, mse=mse, nrmse=nrmse, r=r, r2=r2, r2_adj=r2_adj)


def metric_table(per_horizon: Dict[int, PredictionMetrics]) -> pd.DataFrame:
    """Metrics as rows, one ``h=<j>`` column per horizon."""
    columns = {f"h={h}": per_horizon[h].as_dict() for h in sorted(per_horizon)}
    table = pd.DataFrame(columns)
    table.index.name = "Metric"
    return table.reset_index()
