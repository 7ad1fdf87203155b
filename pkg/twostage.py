"""
Two-stage estimation.

Stage 1 runs spike-and-slab regression of the standardized response on the
lag-expanded covariates and keeps the columns whose inclusion probability
beats 1/p. Stage 2 regresses the stage-1 residuals on their own first q lags
with the same sampler and keeps the lags whose inclusion probability beats
1/q. Point estimates are posterior means conditional on inclusion.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from armodel import ARCoefficients, build_A_matrix, build_residual_lag_matrix, require_stationary
from data import LaggedRegressionProblem, ScalingParams, fit_scaling
from run_logger import get_logger
from sampler import GibbsConfig, PosteriorSummary, gibbs_spike_slab, summarize

logger = get_logger("twostage")

STATIONARITY_HINT = "use a smaller number of error lags or a narrower spike (smaller tau0)"


@dataclass
class TwoStageConfig:
    q_max: int = 10
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    beta_threshold_scale: float = 1.0
    phi_threshold_scale: float = 1.0
    refine: bool = False

    def __post_init__(self):
        if self.q_max < 0:
            raise ValueError(f"q_max must be non-negative, got {self.q_max}")
        if self.beta_threshold_scale <= 0 or self.phi_threshold_scale <= 0:
            raise ValueError("Threshold scales must be positive")


class Stage1Fit(NamedTuple):
    summary: PosteriorSummary
    t_beta: np.ndarray
    beta_hat: np.ndarray
    residuals: np.ndarray


class Stage2Fit(NamedTuple):
    summary: PosteriorSummary
    t_phi: np.ndarray
    phi_hat: ARCoefficients


@dataclass(frozen=True)
class TwoStageFit:
    t_beta: np.ndarray
    t_phi: np.ndarray
    beta_hat: np.ndarray
    phi_hat: ARCoefficients
    residuals: np.ndarray
    stage1: PosteriorSummary
    stage2: PosteriorSummary
    column_labels: List[str] = field(default_factory=list)
    scaling: Optional[ScalingParams] = None

    @property
    def q(self) -> int:
        return self.phi_hat.q

    def report(self) -> Dict:
        """Structured fit report: selections, estimates, residual diagnostics."""
        labels = self.column_labels or [f"x{j}" for j in range(self.beta_hat.size)]
        beta_orig = (
            self.scaling.unscale_coefficients(self.beta_hat) if self.scaling is not None else self.beta_hat
        )
        order = sorted(self.t_beta.tolist(), key=lambda j: -self.stage1.incl_prob[j])
        selected = [
            {
                "column": labels[j],
                "inclusion_probability": float(self.stage1.incl_prob[j]),
                "beta_standardized": float(self.beta_hat[j]),
                "beta_original_units": float(beta_orig[j]),
            }
            for j in order
        ]
        A = build_A_matrix(self.phi_hat, self.residuals.size)
        shocks = A.matvec(self.residuals)
        max_lag = max(self.q, 1)
        return {
            "n": int(self.residuals.size),
            "p": int(self.beta_hat.size),
            "q": self.q,
            "t_beta": selected,
            "inclusion_probabilities": {labels[j]: float(v) for j, v in enumerate(self.stage1.incl_prob)},
            "t_phi": [int(lag) + 1 for lag in self.t_phi],
            "phi_hat": [float(v) for v in self.phi_hat.phi],
            "phi_inclusion_probabilities": [float(v) for v in self.stage2.incl_prob],
            "residual_diagnostics": {
                "residual_variance": float(np.var(self.residuals)),
                "shock_variance": float(np.var(shocks)),
                "residual_autocorrelation": autocorrelations(self.residuals, max_lag),
                "shock_autocorrelation": autocorrelations(shocks, max_lag),
            },
        }


def autocorrelations(series: np.ndarray, max_lag: int) -> List[float]:
    x = np.asarray(series, dtype=float) - np.mean(series)
    denom = float(x @ x)
    if denom <= 0:
        return [0.0] * max_lag
    return [float(x[lag:] @ x[:-lag]) / denom for lag in range(1, min(max_lag, x.size - 1) + 1)]


def select_by_threshold(incl_prob: np.ndarray, threshold: float) -> np.ndarray:
    return np.flatnonzero(np.asarray(incl_prob) > threshold)


def _empty_summary() -> PosteriorSummary:
    return PosteriorSummary(
        incl_prob=np.zeros(0), beta_mean=np.zeros(0), beta_mean_given_incl=np.zeros(0), sigma_sq_mean=float("nan")
    )


def _select_covariates(
    y: np.ndarray, X: np.ndarray, cfg: GibbsConfig, threshold_scale: float
) -> Stage1Fit:
    p = X.shape[1]
    summary = summarize(gibbs_spike_slab(y, X, cfg))
    t_beta = select_by_threshold(summary.incl_prob, threshold_scale / p)
    beta = np.zeros(p)
    beta[t_beta] = summary.beta_mean_given_incl[t_beta]
    return Stage1Fit(summary, t_beta, beta, y - X @ beta)


def fit_stage1(
    problem: LaggedRegressionProblem, cfg: Optional[GibbsConfig] = None, threshold_scale: float = 1.0
) -> Stage1Fit:
    """Select covariates and their lags."""
    if not problem.standardized:
        raise ValueError("Stage 1 expects a standardized problem; call data.standardize first")
    cfg = cfg or GibbsConfig()
    fit = _select_covariates(problem.y, problem.X, cfg, threshold_scale)
    logger.info(f"Stage 1: {fit.t_beta.size} of {problem.p} columns selected")
    return fit


def fit_stage2(
    residuals: np.ndarray, q: int, cfg: Optional[GibbsConfig] = None, threshold_scale: float = 1.0
) -> Stage2Fit:
    """Select AR lags of the residual process."""
    residuals = np.asarray(residuals, dtype=float).reshape(-1)
    if q == 0:
        return Stage2Fit(_empty_summary(), np.zeros(0, dtype=int), ARCoefficients.zeros(0))

    E = build_residual_lag_matrix(residuals, q, drop_leading_row=True)
    target = residuals[1:]
    scaling = fit_scaling(target, E, labels=[f"residual_lag{lag}" for lag in range(1, q + 1)])
    y_std = scaling.transform_y(target)
    E_std = scaling.transform_X(E)

    cfg = cfg or GibbsConfig()
    stage_cfg = replace(cfg, screen=None, stream=cfg.stream + (2,))
    summary = summarize(gibbs_spike_slab(y_std, E_std, stage_cfg))
    t_phi = select_by_threshold(summary.incl_prob, threshold_scale / q)

    phi_std = np.zeros(q)
    phi_std[t_phi] = summary.beta_mean_given_incl[t_phi]
    phi = ARCoefficients(scaling.unscale_coefficients(phi_std))
    logger.info(f"Stage 2: lags {[int(l) + 1 for l in t_phi]} of {q} selected")
    return Stage2Fit(summary, t_phi, phi)


def fit_two_stage(
    problem: LaggedRegressionProblem, q: Optional[int] = None, cfg: Optional[TwoStageConfig] = None
) -> TwoStageFit:
    cfg = cfg or TwoStageConfig()
    q = cfg.q_max if q is None else q

    stage1 = fit_stage1(problem, cfg.gibbs, cfg.beta_threshold_scale)
    stage2 = fit_stage2(stage1.residuals, q, cfg.gibbs, cfg.phi_threshold_scale)
    require_stationary(stage2.phi_hat, hint=STATIONARITY_HINT)

    if cfg.refine and stage2.t_phi.size:
        # one GLS-style pass: whiten by A(phi_hat), reselect, recompute residuals on the raw scale
        A = build_A_matrix(stage2.phi_hat, problem.n)
        refine_cfg = replace(cfg.gibbs, stream=cfg.gibbs.stream + (3,))
        whitened = _select_covariates(
            A.matvec(problem.y), A.matvec(problem.X), refine_cfg, cfg.beta_threshold_scale
        )
        stage1 = Stage1Fit(
            whitened.summary, whitened.t_beta, whitened.beta_hat, problem.y - problem.X @ whitened.beta_hat
        )
        stage2 = fit_stage2(stage1.residuals, q, refine_cfg, cfg.phi_threshold_scale)
        require_stationary(stage2.phi_hat, hint=STATIONARITY_HINT)
        logger.info("Refinement pass complete")

    return TwoStageFit(
        t_beta=stage1.t_beta,
        t_phi=stage2.t_phi,
        beta_hat=stage1.beta_hat,
        phi_hat=stage2.phi_hat,
        residuals=stage1.residuals,
        stage1=stage1.summary,
        stage2=stage2.summary,
        column_labels=problem.labels,
        scaling=problem.scaling,
    )
