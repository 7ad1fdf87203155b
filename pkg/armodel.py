"""
AR(q) error machinery.

A(phi) is the unit lower-triangular banded matrix with -phi_l on the l-th
subdiagonal, so that A(phi) eps = u turns AR(q) errors into white shocks.
It is stored as its band only; products and solves run as O(nq) linear
filters and never materialise the dense matrix outside of to_dense().
Pre-sample errors are taken as zero throughout.
"""

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.signal import lfilter

from errors import DataError, NonStationaryError
from rng import make_rng
from run_logger import get_logger

logger = get_logger("armodel")

STATIONARITY_TOL = 1e-8

PhiLike = Union["ARCoefficients", np.ndarray, list, tuple]


def _as_phi(phi: PhiLike) -> np.ndarray:
    if isinstance(phi, ARCoefficients):
        return phi.phi
    arr = np.asarray(phi, dtype=float).reshape(-1)
    return arr


class StationarityReport(NamedTuple):
    stationary: bool
    root_moduli: np.ndarray


@dataclass(frozen=True)
class ARCoefficients:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float).reshape(-1)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def zeros(cls, q: int) -> "ARCoefficients":
        return cls(np.zeros(q))

    @property
    def q(self) -> int:
        return int(self.phi.shape[0])

    @property
    def stationary(self) -> bool:
        return check_stationarity(self.phi).stationary


@dataclass(frozen=True)
class BandedLowerTriangular:
    """A(phi) of size n x n: unit diagonal, -phi_l on subdiagonal l."""

    n: int
    band: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Dimension must be at least 1, got {self.n}")
        band = np.array(self.band, dtype=float).reshape(-1)
        band.setflags(write=False)
        object.__setattr__(self, "band", band)

    @property
    def q(self) -> int:
        return int(self.band.shape[0])

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise ValueError(f"Length mismatch: A is {self.n} x {self.n}, vector has {v.shape[0]} rows")
        return v

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """A @ v, applied column-wise to 2-D input."""
        v = self._check(v)
        if self.q == 0:
            return v.copy()
        return lfilter(np.r_[1.0, -self.band], [1.0], v, axis=0)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        """A.T @ v."""
        v = self._check(v)
        if self.q == 0:
            return v.copy()
        flipped = lfilter(np.r_[1.0, -self.band], [1.0], v[::-1], axis=0)
        return flipped[::-1].copy()

    def solve(self, u: np.ndarray) -> np.ndarray:
        """x with A @ x = u, by forward substitution."""
        u = self._check(u)
        if self.q == 0:
            return u.copy()
        return lfilter([1.0], np.r_[1.0, -self.band], u, axis=0)

    def to_dense(self) -> np.ndarray:
        dense = np.eye(self.n)
        for lag, value in enumerate(self.band, start=1):
            if lag >= self.n:
                break
            idx = np.arange(lag, self.n)
            dense[idx, idx - lag] = -value
        return dense


def build_A_matrix(phi: PhiLike, n: int) -> BandedLowerTriangular:
    return BandedLowerTriangular(n=n, band=_as_phi(phi))


def whiten(A: BandedLowerTriangular, v: np.ndarray) -> np.ndarray:
    return A.matvec(v)


def unwhiten(A: BandedLowerTriangular, u: np.ndarray) -> np.ndarray:
    return A.solve(u)


def check_stationarity(phi: PhiLike) -> StationarityReport:
    """Roots of 1 - sum_l phi_l z^l must all lie outside the unit circle."""
    coefs = _as_phi(phi)
    nonzero = np.flatnonzero(coefs)
    if nonzero.size == 0:
        return StationarityReport(True, np.array([]))
    coefs = coefs[: nonzero[-1] + 1]
    # np.roots wants the highest power first
    poly = np.r_[-coefs[::-1], 1.0]
    moduli = np.sort(np.abs(np.roots(poly)))
    return StationarityReport(bool(np.all(moduli > 1.0 + STATIONARITY_TOL)), moduli)


def require_stationary(phi: PhiLike, hint: str = "") -> StationarityReport:
    report = check_stationarity(phi)
    if not report.stationary:
        raise NonStationaryError(_as_phi(phi), report.root_moduli, hint=hint)
    return report


def ar_shocks(sigma: float, size: int, seed: Union[int, np.random.Generator]) -> np.ndarray:
    """The Gaussian shocks u_t ~ N(0, sigma^2) that simulate_ar_errors consumes."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    return sigma * rng.standard_normal(size)


def simulate_ar_errors(
    phi: PhiLike,
    sigma: float,
    n: int,
    seed: Union[int, np.random.Generator],
    burn_in: int = 0,
) -> np.ndarray:
    """eps_t = sum_l phi_l eps_{t-l} + u_t from zero pre-sample values.

    The first ``burn_in`` values are generated and discarded.
    """
    if burn_in < 0:
        raise ValueError(f"burn_in must be non-negative, got {burn_in}")
    require_stationary(phi)
    u = ar_shocks(sigma, n + burn_in, seed)
    eps = unwhiten(build_A_matrix(phi, n + burn_in), u)
    return eps[burn_in:]


def build_residual_lag_matrix(eps: np.ndarray, q: int, drop_leading_row: bool = False) -> np.ndarray:
    """Columns are eps shifted down by l = 1..q with l leading zeros.

    With ``drop_leading_row`` the first (all-zero) row is removed, giving
    the (n-1) x q matrix regressed against eps[1:].
    """
    eps = np.asarray(eps, dtype=float).reshape(-1)
    n = eps.shape[0]
    if q < 0:
        raise ValueError(f"q must be non-negative, got {q}")
    if q >= n:
        raise DataError(f"Error-lag count q={q} must be smaller than the residual length n={n}")

    E = np.zeros((n, q))
    for lag in range(1, q + 1):
        E[lag:, lag - 1] = eps[: n - lag]
    return E[1:] if drop_leading_row else E
