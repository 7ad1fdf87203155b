"""
Closed-form spike-and-slab screening conditional on the AR coefficients.

For one column j, integrating out the remaining coefficients (ridge prior,
scale tau_ridge) and the AR covariance leaves the quadratic-form matrix

    M_j = A(phi)^T [I - W (W^T W + tau_ridge^-2 I)^-1 W^T] A(phi),
    W = A(phi) X_[-j],

and, after integrating sigma^2 against IG(a, b), the posterior of beta_j is a
two-component Student-t mixture with nu = n + 2a degrees of freedom. All
mixture weights are kept in log space.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from armodel import PhiLike, build_A_matrix, require_stationary
from errors import DegenerateDenominatorError, NotPositiveDefiniteError
from run_logger import get_logger

logger = get_logger("posterior")

DENOMINATOR_FLOOR = 1e-12
SYMMETRY_TOL = 1e-8


@dataclass
class ScreenConfig:
    """Spike/slab/ridge scales (standard deviations, not variances) and IG(a, b)."""

    tau0: float
    tau1: float
    tau_ridge: float
    q_incl: float
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        # tau0 == tau1 is accepted: it switches selection off and is a useful check
        if not 0 < self.tau0 <= self.tau1:
            raise ValueError(f"Need 0 < tau0 <= tau1, got tau0={self.tau0}, tau1={self.tau1}")
        if self.tau_ridge <= 0:
            raise ValueError(f"tau_ridge must be positive, got {self.tau_ridge}")
        if not 0 < self.q_incl < 1:
            raise ValueError(f"q_incl must lie in (0, 1), got {self.q_incl}")
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"Inverse-gamma a and b must be positive, got a={self.a}, b={self.b}")

    @classmethod
    def default_for(cls, n: int, p: int) -> "ScreenConfig":
        """tau0^2 = 1/(n p), tau1^2 = 1, tau_ridge^2 = 1/n, q_incl = 1/p, a = b = 1."""
        n = max(int(n), 1)
        p = max(int(p), 1)
        return cls(
            tau0=math.sqrt(1.0 / (n * p)),
            tau1=1.0,
            tau_ridge=math.sqrt(1.0 / n),
            q_incl=1.0 / p if p > 1 else 0.5,
        )


@dataclass(frozen=True)
class CoefficientPosterior:
    j: int
    mu0: float
    mu1: float
    xi0_sq_scale: float
    xi1_sq_scale: float
    psi0: float
    psi1: float
    logF0: float
    logF1: float
    incl_prob: float
    beta_hat: float
    dof: float


class ScreeningResult(NamedTuple):
    posteriors: List[CoefficientPosterior]
    incl_prob: np.ndarray


def shrinkage_matrix(X_minus_j: np.ndarray, phi: PhiLike, tau_ridge: float) -> np.ndarray:
    """The n x n matrix (I - H_j) for the nuisance columns X_minus_j."""
    require_stationary(phi)
    X_minus_j = np.asarray(X_minus_j, dtype=float)
    if X_minus_j.ndim != 2:
        raise ValueError("X_minus_j must be 2-D (n x m)")
    n, m = X_minus_j.shape
    A = build_A_matrix(phi, n)

    if m == 0:
        inner = np.eye(n)
    else:
        W = A.matvec(X_minus_j)
        gram = W.T @ W + np.eye(m) / tau_ridge**2
        K = linalg.solve(gram, W.T, assume_a="pos")
        inner = np.eye(n) - W @ K

    # inner is symmetric, so (A^T inner)^T = inner A
    left = A.rmatvec(inner)
    M = A.rmatvec(left.T)
    return 0.5 * (M + M.T)


def shrinkage_quadratics(
    x_j: np.ndarray, y: np.ndarray, X_minus_j: np.ndarray, phi: PhiLike, tau_ridge: float
) -> Tuple[float, float, float]:
    """x_j'M x_j, x_j'M y and y'M y without forming the n x n matrix M."""
    require_stationary(phi)
    X_minus_j = np.asarray(X_minus_j, dtype=float)
    n, m = X_minus_j.shape
    A = build_A_matrix(phi, n)
    u = A.matvec(np.asarray(x_j, dtype=float))
    v = A.matvec(np.asarray(y, dtype=float))
    s, c, yMy = float(u @ u), float(u @ v), float(v @ v)
    if m == 0:
        return s, c, yMy

    W = A.matvec(X_minus_j)
    factor = linalg.cho_factor(W.T @ W + np.eye(m) / tau_ridge**2, lower=True)
    Wu, Wv = W.T @ u, W.T @ v
    Ku, Kv = linalg.cho_solve(factor, Wu), linalg.cho_solve(factor, Wv)
    return s - float(Wu @ Ku), c - float(Wu @ Kv), yMy - float(Wv @ Kv)


def beta_hat(x_j: np.ndarray, M: np.ndarray, y: np.ndarray) -> float:
    """Maximiser of the integrated likelihood in beta_j."""
    x_j = np.asarray(x_j, dtype=float)
    Mx = M @ x_j
    denom = float(x_j @ Mx)
    if denom < DENOMINATOR_FLOOR:
        raise DegenerateDenominatorError(f"x_j^T M x_j = {denom:.3g} is below {DENOMINATOR_FLOOR}")
    return float(Mx @ np.asarray(y, dtype=float)) / denom


def inclusion_odds(logF0: float, logF1: float, q_incl: float) -> float:
    """q F1 / (q F1 + (1 - q) F0), evaluated with log-sum-exp."""
    if q_incl <= 0.0:
        return 0.0
    if q_incl >= 1.0:
        return 1.0
    log_w1 = math.log(q_incl) + logF1
    log_w0 = math.log1p(-q_incl) + logF0
    return float(math.exp(log_w1 - np.logaddexp(log_w0, log_w1)))


def _posterior_from_quadratics(
    j: int, s: float, c: float, yMy: float, n: int, cfg: ScreenConfig
) -> CoefficientPosterior:
    if s < DENOMINATOR_FLOOR:
        raise DegenerateDenominatorError(f"Column {j}: x_j^T M x_j = {s:.3g} is below {DENOMINATOR_FLOOR}")
    dof = n + 2.0 * cfg.a
    parts = {}
    for k, tau in ((0, cfg.tau0), (1, cfg.tau1)):
        prior_prec = tau**-2
        prec = s + prior_prec
        rate = cfg.b + 0.5 * yMy - 0.5 * c * c / prec
        if rate <= 0:
            raise NotPositiveDefiniteError(
                f"Column {j}: posterior rate {rate:.6g} is not positive (s={s:.6g}, c={c:.6g}, "
                f"y'My={yMy:.6g}); the shrinkage matrix has lost positive semi-definiteness"
            )
        parts[k] = dict(
            mu=c / prec,
            xi=1.0 / prec,
            psi=rate / (dof * prec),
            logF=0.5 * (math.log(prior_prec) - math.log(prec)) - (n / 2.0 + cfg.a) * math.log(rate),
        )
    return CoefficientPosterior(
        j=j,
        mu0=parts[0]["mu"],
        mu1=parts[1]["mu"],
        xi0_sq_scale=parts[0]["xi"],
        xi1_sq_scale=parts[1]["xi"],
        psi0=parts[0]["psi"],
        psi1=parts[1]["psi"],
        logF0=parts[0]["logF"],
        logF1=parts[1]["logF"],
        incl_prob=inclusion_odds(parts[0]["logF"], parts[1]["logF"], cfg.q_incl),
        beta_hat=c / s,
        dof=dof,
    )


def coefficient_posterior(
    j: int, y: np.ndarray, X: np.ndarray, phi: PhiLike, cfg: Optional[ScreenConfig] = None
) -> CoefficientPosterior:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 0 <= j < p:
        raise IndexError(f"Column index {j} out of range for p={p}")
    cfg = cfg or ScreenConfig.default_for(n, p)

    s, c, yMy = shrinkage_quadratics(X[:, j], y, np.delete(X, j, axis=1), phi, cfg.tau_ridge)
    return _posterior_from_quadratics(j, s, c, yMy, n, cfg)


def screen_all(
    y: np.ndarray, X: np.ndarray, phi: PhiLike, cfg: Optional[ScreenConfig] = None
) -> ScreeningResult:
    """Analytic screening of every column."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    cfg = cfg or ScreenConfig.default_for(n, p)
    posteriors = [coefficient_posterior(j, y, X, phi, cfg) for j in range(p)]
    probs = np.array([post.incl_prob for post in posteriors])
    logger.debug(f"Screened {p} columns; {int(np.sum(probs > 0.5))} above 0.5")
    return ScreeningResult(posteriors, probs)


def student_t_mixture_logpdf(beta: np.ndarray, post: CoefficientPosterior) -> np.ndarray:
    """Log posterior density of beta_j under the two-component t mixture.

    The t scale of component k is sqrt(2 psi_k).
    """
    beta = np.asarray(beta, dtype=float)
    comp0 = stats.t.logpdf(beta, df=post.dof, loc=post.mu0, scale=math.sqrt(2.0 * post.psi0))
    comp1 = stats.t.logpdf(beta, df=post.dof, loc=post.mu1, scale=math.sqrt(2.0 * post.psi1))
    pi = min(max(post.incl_prob, 1e-300), 1.0 - 1e-16)
    return np.logaddexp(math.log1p(-pi) + comp0, math.log(pi) + comp1)


def eigen_diagnostic(M: np.ndarray) -> Tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"Matrix is not symmetric (max asymmetry {asym:.3g})")
    eigs = linalg.eigvalsh(M)
    return float(eigs[0]), float(eigs[-1])


def gram_eigen_diagnostic(X: np.ndarray, phi: PhiLike) -> Tuple[float, float]:
    """Extreme eigenvalues of X^T A^T A X / n."""
    X = np.asarray(X, dtype=float)
    W = build_A_matrix(phi, X.shape[0]).matvec(X)
    return eigen_diagnostic(W.T @ W / X.shape[0])


def correlation_ratio_diagnostic(X: np.ndarray, active: Sequence[int]) -> float:
    """sup over inactive j, max over active k of |rho_jk / (1 + sum_{l != j,k} rho_kl)|.

    rho is X^T X / n. Reported only; nothing downstream depends on it.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    active = sorted(set(int(k) for k in active))
    inactive = [j for j in range(p) if j not in active]
    if not active or not inactive:
        return 0.0
    rho = X.T @ X / n
    row_sums = rho.sum(axis=1)
    worst = 0.0
    for j in inactive:
        for k in active:
            rest = row_sums[k] - rho[k, j] - rho[k, k]
            denom = 1.0 + rest
            ratio = abs(rho[j, k] / denom) if denom != 0 else math.inf
            worst = max(worst, ratio)
    return float(worst)
