"""
Power allocation for energy-detection constellations.

:func:`optimize` alternates two steps until the power vector settles:

1. given powers, set every threshold to the optimal likelihood crossing;
2. given thresholds, put each interior symbol's mean energy at the middle of
   its decision region, fix ``p_1 = 0`` and close the budget with ``p_M``.

If the budget-closing ``p_M`` lands below other powers the vector is
re-sorted, which relabels the symbols. :func:`brute_force` is an exhaustive
grid search used as an oracle for the alternating scheme, and
:func:`convexity_probe` checks midpoint convexity of the error probability
over random power vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detector import (Boundaries, average_sep, boundaries_array,
                       optimal_boundaries, sep_array)
from .errors import DomainError, GridSizeError, InfeasibleBudgetError
from .model import Constellation, SystemParams, validate_constellation

__all__ = [
    "TraceRecord",
    "OptResult",
    "ProbeReport",
    "init_powers",
    "update_powers",
    "optimize",
    "brute_force",
    "convexity_probe",
    "convexity_gap",
    "DEFAULT_EPSILON",
    "DEFAULT_MAX_ITER",
    "MAX_GRID_POINTS",
]

DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITER = 1000
MAX_GRID_POINTS = 10 ** 8
# minimal spacing, as a fraction of p_bar, enforced when a power is clamped
SPACING = 1e-9


@dataclass(frozen=True)
class TraceRecord:
    """
    One iteration: the powers fed to the threshold step, the thresholds it
    produced, the resulting error probability, and whether the following
    power update had to clamp or nudge a value to keep strict ordering.
    """

    powers: np.ndarray
    lambdas: np.ndarray
    sep: float
    clamped: bool = False
    reordered: bool = False


@dataclass(frozen=True)
class OptResult:
    constellation: Constellation
    boundaries: Boundaries
    sep: float
    iterations: int
    converged: bool
    trace: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class ProbeReport:
    trials: int
    violations: int
    max_violation: float
    tolerance: float


def init_powers(params: SystemParams, scheme: str = "ramp") -> Constellation:
    """
    Starting powers with ``p_1 = 0`` and mean exactly ``p_bar``.

    ``"ramp"`` spaces powers linearly up to ``2 p_bar``; ``"geometric"``
    doubles the gaps, ``p_m ~ 2**(m-1) - 1``, then rescales to the budget.
    """
    M = params.M
    if M < 2:
        raise DomainError("need at least two symbols")
    if scheme == "ramp":
        p = 2.0 * params.p_bar * np.arange(M) / (M - 1)
    elif scheme == "geometric":
        shape = 2.0 ** np.arange(M) - 1.0
        p = shape * (M * params.p_bar / shape.sum())
    else:
        raise DomainError(f"unknown initialisation scheme {scheme!r}")
    return validate_constellation(p, params)


def _update(lambdas: np.ndarray, params: SystemParams):
    M = params.M
    if len(lambdas) != M - 1:
        raise DomainError(f"expected {M - 1} boundaries, got {len(lambdas)}")
    delta = SPACING * params.p_bar
    p = np.zeros(M)
    clamped = False
    for m in range(1, M - 1):
        # centre the symbol's mean energy in its decision region
        p[m] = 0.5 * (lambdas[m] + lambdas[m - 1]) - params.sigma_z2
        if p[m] <= p[m - 1]:
            p[m] = p[m - 1] + delta
            clamped = True
    p[M - 1] = M * params.p_bar - p[:M - 1].sum()
    if p[M - 1] <= 0:
        raise InfeasibleBudgetError(
            f"closing power p_M={p[M - 1]!r} is not positive; the budget "
            f"cannot be met with these boundaries")
    reordered = bool(np.any(np.diff(p) <= 0))
    if reordered:
        p = np.sort(p)
        for m in range(1, M):
            if p[m] <= p[m - 1]:
                p[m] = p[m - 1] + delta
                clamped = True
    return p, clamped, reordered


def update_powers(boundaries: Boundaries,
                  params: SystemParams) -> Constellation:
    """
    Power step for fixed thresholds.

    ``p_1 = 0``; each interior symbol gets ``(lambda_m + lambda_{m-1})/2 -
    sigma_z2`` (kept at least ``1e-9 p_bar`` above its predecessor); ``p_M``
    absorbs the remaining budget and is moved to its sorted position if it
    falls below the others.

    Raises
    ------
    InfeasibleBudgetError
        If the remaining budget for ``p_M`` is not positive.
    """
    p, _, _ = _update(boundaries.lambdas, params)
    return validate_constellation(p, params)


def _sep(p, params):
    lam = boundaries_array(p, params.K, params.N, params.sigma_z2)
    return lam, float(sep_array(p, lam, params.K, params.N, params.sigma_z2))


def optimize(params: SystemParams, epsilon: float = DEFAULT_EPSILON,
             max_iter: int = DEFAULT_MAX_ITER,
             init: Constellation | None = None) -> OptResult:
    """
    Alternate threshold and power updates until the powers stop moving.

    Stops when the squared Euclidean change of the power vector drops below
    ``epsilon``; hitting ``max_iter`` first returns ``converged=False``.
    One iteration is one threshold step followed by one power step. The
    returned constellation is the last power update and ``sep`` is evaluated
    at its optimal thresholds.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be > 0")
    if max_iter < 1:
        raise DomainError("max_iter must be >= 1")
    if init is None:
        init = init_powers(params)
    p = np.array(init.powers, dtype=float)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lam, sep = _sep(p, params)
        p_new, clamped, reordered = _update(lam, params)
        trace.append(TraceRecord(_ro(p), _ro(lam), sep, clamped, reordered))
        step = float(np.sum((p - p_new) ** 2))
        p = p_new
        if step < epsilon:
            converged = True
            break
    final = validate_constellation(p, params)
    bounds = optimal_boundaries(final, params)
    return OptResult(
        constellation=final,
        boundaries=bounds,
        sep=average_sep(final, bounds, params),
        iterations=it,
        converged=converged,
        trace=tuple(trace),
    )


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _grid_count(M: int, units: float) -> float:
    """
    Number of grid candidates, counted through the gap representation:
    with ``d_j = k_j - k_{j-1} >= 1`` the budget condition reads
    ``sum_j (M - j + 1) d_j < units`` over the interior gaps.
    """
    size = int(math.ceil(units))
    if M == 2:
        return 1.0
    ways = np.zeros(size)
    ways[0] = 1.0
    for w in range(M - 1, 1, -1):
        # each gap contributes w * d with d >= 1
        new = np.zeros(size)
        for r in range(w):
            col = ways[r::w]
            shifted = np.concatenate(([0.0], np.cumsum(col)[:-1]))
            new[r::w] = shifted
        ways = new
    # weighted sum of interior gaps must stay strictly below ``units``
    s = np.arange(size)
    return float(ways[s < units].sum())


def _grid_blocks(M: int, units: float):
    """Yield arrays of interior grid indices ``k_2 < ... < k_{M-1}`` in
    lexicographic order, with ``sum(k) + k_{M-1} < units``."""
    D = M - 2
    if D == 0:
        yield np.zeros((1, 0), dtype=np.int64)
        return

    def feasible(prefix_sum, last, remaining):
        # cheapest completion: remaining values last+1 .. last+remaining
        extra = remaining * last + remaining * (remaining + 1) // 2
        top = last + remaining
        return units - (prefix_sum + extra) > top

    def rec(prefix, prefix_sum, last):
        remaining = D - len(prefix)
        if remaining == 1:
            ks = np.arange(last + 1, int(math.ceil(units)) + 1)
            ks = ks[units - (prefix_sum + ks) > ks]
            if ks.size:
                block = np.empty((ks.size, D), dtype=np.int64)
                block[:, :-1] = prefix
                block[:, -1] = ks
                yield block
            return
        v = last + 1
        while feasible(prefix_sum + v, v, remaining - 1):
            yield from rec(prefix + [v], prefix_sum + v, v)
            v += 1

    yield from rec([], 0, 0)


def brute_force(params: SystemParams, grid_step: float = 0.01) -> OptResult:
    """
    Exhaustive search over powers on a grid of ``grid_step * p_bar``.

    ``p_1 = 0``, the interior powers run over the grid in strictly increasing
    order, and ``p_M`` is whatever keeps the mean at ``p_bar`` (kept only if
    it is the largest). Every candidate is scored at its optimal thresholds.
    Ties go to the lexicographically smallest power vector.

    Raises
    ------
    GridSizeError
        If the grid has more than ``1e8`` candidates.
    """
    if not grid_step > 0:
        raise DomainError("grid_step must be > 0")
    M = params.M
    units = M / grid_step
    if abs(units - round(units)) < 1e-9 * units:
        units = float(round(units))
    count = _grid_count(M, units)
    if count > MAX_GRID_POINTS:
        raise GridSizeError(
            f"grid has ~{count:.3g} candidates (limit {MAX_GRID_POINTS})")
    if count < 1:
        raise GridSizeError("grid step too coarse: no feasible candidate")
    step_power = grid_step * params.p_bar
    best_sep, best_p, n_eval = math.inf, None, 0
    for ks in _grid_blocks(M, units):
        interior = ks * step_power
        p = np.zeros((ks.shape[0], M))
        p[:, 1:M - 1] = interior
        p[:, M - 1] = M * params.p_bar - interior.sum(axis=1)
        lam = boundaries_array(p, params.K, params.N, params.sigma_z2)
        sep = sep_array(p, lam, params.K, params.N, params.sigma_z2)
        n_eval += len(sep)
        i = int(np.argmin(sep))
        # blocks arrive in lexicographic order: strict < keeps the first tie
        if sep[i] < best_sep:
            best_sep, best_p = float(sep[i]), p[i].copy()
    final = validate_constellation(best_p, params)
    bounds = optimal_boundaries(final, params)
    return OptResult(
        constellation=final,
        boundaries=bounds,
        sep=average_sep(final, bounds, params),
        iterations=n_eval,
        converged=True,
    )


def _pe_at_optimal(x, params):
    lam = boundaries_array(x, params.K, params.N, params.sigma_z2)
    return sep_array(x, lam, params.K, params.N, params.sigma_z2)


def convexity_gap(params: SystemParams, p, q, t):
    """
    ``Pe(t p + (1-t) q) - (t Pe(p) + (1-t) Pe(q))`` with ``Pe`` evaluated at
    optimal thresholds; positive values are convexity violations.
    Broadcasts over leading axes of ``p``, ``q`` and ``t``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise DomainError("mixing weight must lie in [0, 1]")
    if t.ndim:
        tt = t[..., None]
    else:
        tt = t
    # at the endpoints the mixture is exactly one of the inputs
    mix = np.where(tt == 1.0, p, np.where(tt == 0.0, q, tt * p + (1 - tt) * q))
    pe_p, pe_q = _pe_at_optimal(p, params), _pe_at_optimal(q, params)
    return _pe_at_optimal(mix, params) - (t * pe_p + (1 - t) * pe_q)


def convexity_probe(params: SystemParams, trials: int, rng_seed: int = 42,
                    tolerance: float = 1e-10) -> ProbeReport:
    """
    Random test of ``Pe(t p + (1-t) q) <= t Pe(p) + (1-t) Pe(q)``.

    ``p`` and ``q`` are uniform draws from the ordered simplex with mean
    ``p_bar``; ``t`` is uniform on ``(0, 1)``; ``Pe`` is the error
    probability at optimal thresholds.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    M = params.M
    total = M * params.p_bar
    p = np.sort(rng.dirichlet(np.ones(M), size=trials), axis=1) * total
    q = np.sort(rng.dirichlet(np.ones(M), size=trials), axis=1) * total
    t = rng.uniform(0.0, 1.0, size=trials)
    excess = convexity_gap(params, p, q, t)
    bad = excess > tolerance
    return ProbeReport(
        trials=int(trials),
        violations=int(np.count_nonzero(bad)),
        max_violation=float(max(excess.max(), 0.0)),
        tolerance=tolerance,
    )
