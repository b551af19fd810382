"""
System parameters and the Gaussian statistics of the averaged receive energy.

A single-antenna transmitter sends one of ``M`` real non-negative amplitudes
``sqrt(p_m)`` to an ``N``-antenna receiver over i.i.d. Rician fading. The
receiver only looks at ``y_tilde = ||y||^2 / N``. For large ``N`` this
statistic is approximately ``Normal(mu_m, sigma2_m)`` with

    mu_m     = p_m + sigma_z2
    sigma2_m = (2K + 1) / (N (K + 1)^2) * p_m^2 + sigma_z2^2 / N
               + 2 sigma_z2 p_m / N

Both moments are exact for any ``N`` under circularly-symmetric complex
channel and noise entries; only the Gaussian shape is asymptotic.

All energies are absolute (not normalised to the noise variance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "SystemParams",
    "Constellation",
    "EnergyStats",
    "rician_moments",
    "energy_stats",
    "snr_to_pbar",
    "validate_constellation",
]

# absolute slack on the average-power constraint
POWER_SLACK = 1e-12


def rician_moments(K: float) -> tuple[float, float]:
    """
    Squared LOS magnitude and scatter variance of a unit-gain Rician tap.

    Parameters
    ----------
    K : float
        Rician factor, ``K >= 0``. ``K = 0`` is Rayleigh fading.

    Returns
    -------
    mu_h_sq, sigma_h2 : float
        ``K / (K + 1)`` and ``1 / (K + 1)``.
    """
    if not K >= 0 or math.isinf(K):
        raise DomainError(f"Rician factor must be finite and >= 0, got {K!r}")
    sigma_h2 = 1.0 / (K + 1.0)
    # 1 - sigma_h2 keeps the pair summing to one to within rounding
    return 1.0 - sigma_h2, sigma_h2


@dataclass(frozen=True)
class SystemParams:
    """Channel and receiver context shared by every computation."""

    K: float
    N: int
    sigma_z2: float
    M: int
    p_bar: float

    def __post_init__(self):
        if not (self.K >= 0 and math.isfinite(self.K)):
            raise DomainError(f"K must be finite and >= 0, got {self.K!r}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.N!r}")
        if int(self.M) != self.M or self.M < 2:
            raise DomainError(f"M must be an integer >= 2, got {self.M!r}")
        if not (self.sigma_z2 > 0 and math.isfinite(self.sigma_z2)):
            raise DomainError(f"sigma_z2 must be > 0, got {self.sigma_z2!r}")
        if not (self.p_bar > 0 and math.isfinite(self.p_bar)):
            raise DomainError(f"p_bar must be > 0, got {self.p_bar!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "sigma_z2", float(self.sigma_z2))
        object.__setattr__(self, "p_bar", float(self.p_bar))

    @classmethod
    def from_snr_db(cls, K, N, M, snr_db, sigma_z2=1.0) -> "SystemParams":
        return cls(K=K, N=N, sigma_z2=sigma_z2, M=M,
                   p_bar=snr_to_pbar(snr_db, sigma_z2))

    @property
    def mu_h_sq(self) -> float:
        return rician_moments(self.K)[0]

    @property
    def sigma_h2(self) -> float:
        return rician_moments(self.K)[1]

    @property
    def snr(self) -> float:
        """Linear SNR ``p_bar / sigma_z2``."""
        return self.p_bar / self.sigma_z2

    def replace(self, **changes) -> "SystemParams":
        values = dict(K=self.K, N=self.N, sigma_z2=self.sigma_z2, M=self.M,
                      p_bar=self.p_bar)
        values.update(changes)
        return SystemParams(**values)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Constellation:
    """
    Ordered symbol powers ``p_1 < ... < p_M``.

    Build instances through :func:`validate_constellation`, which enforces the
    ordering and the average-power constraint.
    """

    powers: np.ndarray
    p_bar: float
    alpha: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "powers", _frozen(self.powers))
        object.__setattr__(self, "alpha", _frozen(self.powers / self.p_bar))

    @property
    def M(self) -> int:
        return len(self.powers)

    def __eq__(self, other):
        if not isinstance(other, Constellation):
            return NotImplemented
        return (self.p_bar == other.p_bar
                and np.array_equal(self.powers, other.powers))

    def __hash__(self):
        return hash((self.p_bar, self.powers.tobytes()))


@dataclass(frozen=True)
class EnergyStats:
    """Mean and variance of ``y_tilde`` given one transmitted symbol."""

    mu: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def energy_variance(p, K: float, N: int, sigma_z2: float):
    """Closed-form variance of ``y_tilde``; broadcasts over array ``p``."""
    k_term = (2.0 * K + 1.0) / (K + 1.0) ** 2
    return (k_term * p * p + sigma_z2 * sigma_z2 + 2.0 * sigma_z2 * p) / N


def energy_stats(params: SystemParams, p_m: float) -> EnergyStats:
    """
    Gaussian parameters of the averaged receive energy for symbol power ``p_m``.

    >>> energy_stats(SystemParams(K=0, N=100, sigma_z2=1, M=2, p_bar=1), 1.0)
    EnergyStats(mu=2.0, sigma2=0.04)
    """
    if not p_m >= 0 or math.isinf(p_m):
        raise DomainError(f"symbol power must be finite and >= 0, got {p_m!r}")
    p_m = float(p_m)
    sigma2 = energy_variance(p_m, params.K, params.N, params.sigma_z2)
    return EnergyStats(mu=p_m + params.sigma_z2, sigma2=float(sigma2))


def snr_to_pbar(snr_db: float, sigma_z2: float) -> float:
    """Average symbol power for an SNR in dB: ``sigma_z2 * 10**(snr_db/10)``."""
    if not sigma_z2 > 0:
        raise DomainError(f"sigma_z2 must be > 0, got {sigma_z2!r}")
    return sigma_z2 * 10.0 ** (snr_db / 10.0)


def validate_constellation(powers: Sequence[float],
                           params: SystemParams) -> Constellation:
    """
    Check a power vector against the ordering and power constraints.

    Raises
    ------
    ValidationError
        On wrong length, a negative or non-finite entry, a non-increasing
        pair, or a mean power above ``params.p_bar`` (plus 1e-12 slack).
    """
    p = np.asarray(powers, dtype=float)
    if p.ndim != 1 or len(p) != params.M:
        raise ValidationError(
            f"expected {params.M} powers, got shape {p.shape}")
    bad = np.flatnonzero(~np.isfinite(p))
    if bad.size:
        raise ValidationError(f"power at index {bad[0]} is not finite")
    neg = np.flatnonzero(p < 0)
    if neg.size:
        raise ValidationError(
            f"power at index {neg[0]} is negative ({float(p[neg[0]])!r})")
    unordered = np.flatnonzero(np.diff(p) <= 0)
    if unordered.size:
        i = unordered[0]
        raise ValidationError(
            f"powers must be strictly increasing: p[{i}]={float(p[i])!r} >= "
            f"p[{i + 1}]={float(p[i + 1])!r}")
    mean = p.sum() / len(p)
    if mean > params.p_bar + POWER_SLACK:
        raise ValidationError(
            f"average power {float(mean)!r} exceeds budget p_bar={params.p_bar!r}")
    return Constellation(powers=p, p_bar=params.p_bar)
