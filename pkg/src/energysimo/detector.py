"""
MAP detection on the averaged receive energy.

Symbol indices in this module are 1-based (``m = 1 .. M``) to match the usual
notation ``p_1 = 0 < p_2 < ...``; the arrays themselves are ordinary numpy
arrays. Boundary ``lambda_m`` separates symbol ``m`` from symbol ``m + 1``;
the outer boundaries ``lambda_0 = 0`` and ``lambda_M = inf`` are implicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateSpacingError, DomainError, ValidationError
from .model import Constellation, EnergyStats, SystemParams, energy_variance

__all__ = [
    "Boundaries",
    "q_function",
    "conditional_pdf",
    "optimal_boundary",
    "optimal_boundaries",
    "per_symbol_error",
    "average_sep",
    "average_sep_pairwise",
    "pair_error_h",
    "decide",
    "boundaries_array",
    "sep_array",
]

# Q values below this are treated as exact zeros (subnormal range)
Q_UNDERFLOW = 1e-300
# relative variance gap below which the boundary formula is refused
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class Boundaries:
    """Interior decision thresholds ``lambda_1 < ... < lambda_{M-1}``."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValidationError("need at least one interior boundary")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValidationError("boundaries must be finite and positive")
        if np.any(np.diff(lam) <= 0):
            raise ValidationError("boundaries must be strictly increasing")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @property
    def M(self) -> int:
        return len(self.lambdas) + 1

    def region(self, m: int) -> tuple[float, float]:
        """Half-open decision interval ``[lo, hi)`` of symbol ``m``."""
        if not 1 <= m <= self.M:
            raise DomainError(f"symbol index {m} outside 1..{self.M}")
        lo = 0.0 if m == 1 else float(self.lambdas[m - 2])
        hi = math.inf if m == self.M else float(self.lambdas[m - 1])
        return lo, hi

    def __eq__(self, other):
        if not isinstance(other, Boundaries):
            return NotImplemented
        return np.array_equal(self.lambdas, other.lambdas)

    def __hash__(self):
        return hash(self.lambdas.tobytes())


def q_function(x):
    """
    Gaussian tail probability ``Q(x) = P(Z > x)`` for ``Z ~ N(0, 1)``.

    Accepts scalars or arrays. Results below 1e-300 are flushed to zero.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("Q-function argument is NaN")
    q = 0.5 * special.erfc(arr / math.sqrt(2.0))
    q = np.where(q < Q_UNDERFLOW, 0.0, q)
    if q.ndim == 0:
        return float(q)
    return q


def conditional_pdf(y_tilde, stats: EnergyStats):
    """Gaussian density of ``y_tilde`` given the symbol with ``stats``."""
    if not stats.sigma2 > 0:
        raise DomainError("variance must be positive")
    y = np.asarray(y_tilde, dtype=float)
    z2 = (y - stats.mu) ** 2 / stats.sigma2
    out = np.exp(-0.5 * z2) / math.sqrt(2.0 * math.pi * stats.sigma2)
    return float(out) if out.ndim == 0 else out


def boundaries_array(p, K: float, N: int, sigma_z2: float) -> np.ndarray:
    """
    Optimal thresholds for one or many ordered power vectors.

    ``p`` has shape ``(..., M)``; the result has shape ``(..., M - 1)``.
    Each threshold is the crossing of the two neighbouring densities. The
    closed form is rearranged so that neither the variance gap nor the
    ``p_m sigma_{m+1}^2 - p_{m+1} sigma_m^2`` term is formed by subtraction.

    When two powers are so close that the densities do not cross before
    ``mu_{m+1}``, the pair error is decreasing on all of ``[mu_m, mu_{m+1}]``
    and the threshold is clipped to ``mu_{m+1}``.
    """
    p = np.asarray(p, dtype=float)
    pa, pb = p[..., :-1], p[..., 1:]
    s = sigma_z2
    k = (2.0 * K + 1.0) / (K + 1.0) ** 2
    a = energy_variance(pa, K, N, s)
    b = energy_variance(pb, K, N, s)
    dp = pb - pa
    c = k * (pa + pb) + 2.0 * s
    gap = dp * c / N
    if np.any(~(gap > DEGENERATE_GAP * b)):
        raise DegenerateSpacingError(
            "adjacent symbols have (nearly) equal energy variance")
    centre = (k * pa * pb - s * s) / c
    spread = np.sqrt(a * b * (dp * dp + gap * np.log1p(gap / a))) / gap
    return np.minimum(s + centre + spread, pb + s)


def sep_array(p, lam, K: float, N: int, sigma_z2: float) -> np.ndarray:
    """Average SEP for power vectors ``(..., M)`` and thresholds ``(..., M-1)``."""
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    mu = p + sigma_z2
    sd = np.sqrt(energy_variance(p, K, N, sigma_z2))
    upper = q_function((lam - mu[..., :-1]) / sd[..., :-1])
    lower = q_function((mu[..., 1:] - lam) / sd[..., 1:])
    return (np.sum(upper, axis=-1) + np.sum(lower, axis=-1)) / p.shape[-1]


def optimal_boundary(m: int, constellation: Constellation,
                     params: SystemParams) -> float:
    """
    Optimal threshold between symbols ``m`` and ``m + 1`` (1-based).

    This is the minimiser of :func:`pair_error_h` on ``[mu_m, mu_{m+1}]``:
    the point where the two conditional densities cross, or ``mu_{m+1}``
    when they do not cross inside the interval.

    Raises
    ------
    DegenerateSpacingError
        If the two energy variances are equal to within 1e-12 relative.
    """
    M = constellation.M
    if not 1 <= m <= M - 1:
        raise DomainError(f"boundary index {m} outside 1..{M - 1}")
    pair = constellation.powers[m - 1:m + 1]
    return float(boundaries_array(pair, params.K, params.N,
                                  params.sigma_z2)[0])


def optimal_boundaries(constellation: Constellation,
                       params: SystemParams) -> Boundaries:
    """All ``M - 1`` optimal thresholds of a constellation."""
    _check_sizes(constellation, None, params)
    lam = boundaries_array(constellation.powers, params.K, params.N,
                           params.sigma_z2)
    return Boundaries(lam)


def _check_sizes(constellation, boundaries, params):
    if constellation.M != params.M:
        raise ValidationError(
            f"constellation has {constellation.M} symbols, params expect "
            f"{params.M}")
    if boundaries is not None and boundaries.M != constellation.M:
        raise ValidationError(
            f"{len(boundaries.lambdas)} boundaries do not fit "
            f"{constellation.M} symbols")


def per_symbol_error(m: int, constellation: Constellation,
                     boundaries: Boundaries, params: SystemParams) -> float:
    """
    Error probability of symbol ``m`` (1-based) under the Gaussian model.

    Edge symbols have one tail term, interior symbols two.
    """
    _check_sizes(constellation, boundaries, params)
    M = constellation.M
    if not 1 <= m <= M:
        raise DomainError(f"symbol index {m} outside 1..{M}")
    st = _stats(constellation, params, m)
    lam = boundaries.lambdas
    err = 0.0
    if m > 1:
        err += q_function((st.mu - lam[m - 2]) / st.sigma)
    if m < M:
        err += q_function((lam[m - 1] - st.mu) / st.sigma)
    return err


def _stats(constellation, params, m) -> EnergyStats:
    p_m = float(constellation.powers[m - 1])
    return EnergyStats(mu=p_m + params.sigma_z2,
                       sigma2=float(energy_variance(p_m, params.K, params.N,
                                                    params.sigma_z2)))


def average_sep(constellation: Constellation, boundaries: Boundaries,
                params: SystemParams) -> float:
    """Average symbol error probability with equiprobable symbols."""
    _check_sizes(constellation, boundaries, params)
    M = constellation.M
    total = math.fsum(per_symbol_error(m, constellation, boundaries, params)
                      for m in range(1, M + 1))
    return total / M


def average_sep_pairwise(constellation: Constellation, boundaries: Boundaries,
                         params: SystemParams) -> float:
    """Same quantity as :func:`average_sep`, summed boundary by boundary."""
    _check_sizes(constellation, boundaries, params)
    M = constellation.M
    total = math.fsum(_pair_error(float(lam), m, constellation, params)
                      for m, lam in enumerate(boundaries.lambdas, start=1))
    return total / M


def _pair_error(lam, m, constellation, params):
    lo = _stats(constellation, params, m)
    hi = _stats(constellation, params, m + 1)
    return (q_function((lam - lo.mu) / lo.sigma)
            + q_function((hi.mu - lam) / hi.sigma))


def pair_error_h(lam: float, m: int, constellation: Constellation,
                 params: SystemParams) -> float:
    """
    Error mass attributable to boundary ``m``: the tail of symbol ``m``
    above ``lam`` plus the tail of symbol ``m + 1`` below it.

    Only defined for ``mu_m <= lam <= mu_{m+1}``.
    """
    M = constellation.M
    if not 1 <= m <= M - 1:
        raise DomainError(f"boundary index {m} outside 1..{M - 1}")
    lo = constellation.powers[m - 1] + params.sigma_z2
    hi = constellation.powers[m] + params.sigma_z2
    if not lo <= lam <= hi:
        raise DomainError(f"lambda={lam!r} outside [{lo!r}, {hi!r}]")
    return _pair_error(float(lam), m, constellation, params)


def decide(y_tilde, boundaries: Boundaries):
    """
    Map received energy to a symbol index in ``1..M``.

    Regions are half-open, ``[lambda_{m-1}, lambda_m)``, so a value sitting
    exactly on a threshold goes to the upper symbol. Works elementwise on
    arrays.
    """
    y = np.asarray(y_tilde, dtype=float)
    idx = np.searchsorted(boundaries.lambdas, y, side="right") + 1
    return int(idx) if idx.ndim == 0 else idx
