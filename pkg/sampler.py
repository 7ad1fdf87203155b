"""
Spike-and-slab Gibbs sampler for standardized linear regression.

Model:
    y | beta, sigma^2 ~ N(X beta, sigma^2 I)
    beta_j | Z_j, sigma^2 ~ N(0, sigma^2 tau_{Z_j}^2)
    Z_j ~ Bernoulli(q_incl),  sigma^2 ~ IG(a, b)

Each scan visits every site j, draws Z_j with beta_j integrated out, then
beta_j given Z_j, and finally sigma^2. The sampler works on the Gram matrix
X^T X and keeps X^T (y - X beta) current, so a site update costs O(p).

exact_enumeration_posterior computes the same inclusion probabilities by
summing the closed-form marginal likelihood over all 2^p models.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from errors import DataError
from posterior import ScreenConfig
from rng import make_rng
from run_logger import get_logger

logger = get_logger("sampler")

MAX_ENUMERATION_P = 12


@dataclass
class GibbsConfig:
    iterations: int = 5000
    burn_in: int = 1000
    seed: int = 0
    screen: Optional[ScreenConfig] = None
    stream: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(f"Need 0 <= burn_in < iterations, got burn_in={self.burn_in}")
        self.stream = tuple(self.stream)

    def resolve_screen(self, n: int, p: int) -> ScreenConfig:
        return self.screen if self.screen is not None else ScreenConfig.default_for(n, p)


@dataclass(frozen=True)
class PosteriorDraws:
    Z: np.ndarray
    beta: np.ndarray
    sigma_sq: np.ndarray

    def __post_init__(self):
        if self.Z.shape != self.beta.shape or self.Z.shape[0] != self.sigma_sq.shape[0]:
            raise ValueError(
                f"Inconsistent draw shapes: Z {self.Z.shape}, beta {self.beta.shape}, sigma_sq {self.sigma_sq.shape}"
            )
        if np.any(self.sigma_sq <= 0):
            raise ValueError("sigma_sq draws must be positive")

    @property
    def kept(self) -> int:
        return int(self.beta.shape[0])

    def mc_standard_error(self) -> np.ndarray:
        """Naive standard error of each beta mean (ignores autocorrelation)."""
        if self.kept < 2:
            return np.full(self.beta.shape[1], np.inf)
        return self.beta.std(axis=0, ddof=1) / math.sqrt(self.kept)


@dataclass(frozen=True)
class PosteriorSummary:
    incl_prob: np.ndarray
    beta_mean: np.ndarray
    beta_mean_given_incl: np.ndarray
    sigma_sq_mean: float

    def selected(self, threshold: float) -> np.ndarray:
        return np.flatnonzero(self.incl_prob > threshold)


def _check_inputs(y: np.ndarray, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).reshape(-1)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X must be n x p with n={y.shape[0]}, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("Need at least one column")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise DataError("Sampler inputs contain non-finite values")
    return y, X


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def gibbs_spike_slab(y: np.ndarray, X: np.ndarray, cfg: Optional[GibbsConfig] = None) -> PosteriorDraws:
    cfg = cfg or GibbsConfig()
    y, X = _check_inputs(y, X)
    n, p = X.shape
    prior = cfg.resolve_screen(n, p)
    rng = make_rng(cfg.seed, *cfg.stream)

    G = X.T @ X
    diag_G = np.diag(G).copy()
    inv_tau_sq = (prior.tau0**-2, prior.tau1**-2)
    log_prior_odds = math.log(prior.q_incl) - math.log1p(-prior.q_incl)
    shape = prior.a + 0.5 * (n + p)

    beta = np.zeros(p)
    Z = np.zeros(p, dtype=bool)
    xt_resid = X.T @ y
    sigma_sq = max(float(y @ y) / n, 1e-8)

    kept = cfg.iterations - cfg.burn_in
    Z_keep = np.zeros((kept, p), dtype=np.int8)
    beta_keep = np.zeros((kept, p))
    sigma_keep = np.zeros(kept)

    logger.debug(f"Gibbs start: n={n}, p={p}, iterations={cfg.iterations}, burn_in={cfg.burn_in}")
    for it in range(cfg.iterations):
        uniforms = rng.random(p)
        normals = rng.standard_normal(p)
        for j in range(p):
            s = diag_G[j]
            c = xt_resid[j] + s * beta[j]
            prec0 = s + inv_tau_sq[0]
            prec1 = s + inv_tau_sq[1]
            log_odds = (
                log_prior_odds
                + 0.5 * (math.log(inv_tau_sq[1] / prec1) - math.log(inv_tau_sq[0] / prec0))
                + 0.5 * c * c / sigma_sq * (1.0 / prec1 - 1.0 / prec0)
            )
            z = uniforms[j] < _expit(log_odds)
            prec = prec1 if z else prec0
            new_beta = c / prec + math.sqrt(sigma_sq / prec) * normals[j]
            delta = new_beta - beta[j]
            if delta != 0.0:
                xt_resid -= G[:, j] * delta
            beta[j] = new_beta
            Z[j] = z

        resid = y - X @ beta
        penalty = float(np.sum(beta * beta * np.where(Z, inv_tau_sq[1], inv_tau_sq[0])))
        rate = prior.b + 0.5 * (float(resid @ resid) + penalty)
        sigma_sq = rate / rng.gamma(shape)

        if it >= cfg.burn_in:
            k = it - cfg.burn_in
            Z_keep[k] = Z
            beta_keep[k] = beta
            sigma_keep[k] = sigma_sq

    logger.debug(f"Gibbs done: mean inclusion {Z_keep.mean():.3f}, mean sigma^2 {sigma_keep.mean():.4g}")
    return PosteriorDraws(Z=Z_keep, beta=beta_keep, sigma_sq=sigma_keep)


def summarize(draws: PosteriorDraws) -> PosteriorSummary:
    if draws.kept < 1:
        raise ValueError("Need at least one kept draw")
    Z = draws.Z.astype(float)
    counts = Z.sum(axis=0)
    included_sum = (draws.beta * Z).sum(axis=0)
    given_incl = np.divide(included_sum, counts, out=np.zeros_like(included_sum), where=counts > 0)
    return PosteriorSummary(
        incl_prob=Z.mean(axis=0),
        beta_mean=draws.beta.mean(axis=0),
        beta_mean_given_incl=given_incl,
        sigma_sq_mean=float(draws.sigma_sq.mean()),
    )


def _log_marginal(
    gamma: np.ndarray, G: np.ndarray, Xty: np.ndarray, yty: float, n: int, prior: ScreenConfig
) -> float:
    tau_sq = np.where(gamma, prior.tau1**2, prior.tau0**2)
    chol = linalg.cholesky(G + np.diag(1.0 / tau_sq), lower=True)
    v = linalg.solve_triangular(chol, Xty, lower=True)
    quad = yty - float(v @ v)
    # log det(I + X D X^T) = log det(D) + log det(D^-1 + X^T X)
    logdet = float(np.sum(np.log(tau_sq))) + 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * logdet - (prior.a + 0.5 * n) * math.log(prior.b + 0.5 * quad)


def exact_enumeration_posterior(
    y: np.ndarray, X: np.ndarray, cfg: Optional[GibbsConfig] = None
) -> np.ndarray:
    """Exact inclusion probabilities under the priors the Gibbs sampler targets."""
    cfg = cfg or GibbsConfig()
    y, X = _check_inputs(y, X)
    n, p = X.shape
    if p > MAX_ENUMERATION_P:
        raise ValueError(f"Enumeration supports p <= {MAX_ENUMERATION_P}, got p={p}")
    prior = cfg.resolve_screen(n, p)

    G = X.T @ X
    Xty = X.T @ y
    yty = float(y @ y)
    gammas = ((np.arange(2**p)[:, None] >> np.arange(p)) & 1).astype(bool)
    sizes = gammas.sum(axis=1)
    log_prior = sizes * math.log(prior.q_incl) + (p - sizes) * math.log1p(-prior.q_incl)
    log_post = np.array([_log_marginal(g, G, Xty, yty, n, prior) for g in gammas]) + log_prior
    weights = np.exp(log_post - logsumexp(log_post))
    return weights @ gammas.astype(float)
