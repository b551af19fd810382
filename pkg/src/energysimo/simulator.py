"""
Monte Carlo engine for the averaged receive energy.

Every trial draws ``N`` complex channel taps and ``N`` complex noise samples
(each as a pair of independent real Gaussians) and forms
``y_tilde = ||h sqrt(p) + z||^2 / N``. The channel mean is real,
``sqrt(K / (K + 1))``; its complex variance ``1 / (K + 1)`` and the noise
variance ``sigma_z2`` are split equally between real and imaginary parts.

Trials are grouped into fixed-size blocks. Block ``b`` of symbol ``m`` gets
its own generator seeded from ``SeedSequence(seed, spawn_key=(m, b))``, so
results do not depend on how blocks are scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import _backend
from .detector import Boundaries, _check_sizes, decide
from .errors import DomainError
from .model import Constellation, SystemParams, energy_stats

__all__ = [
    "SimResult",
    "GaussianityReport",
    "sample_energy",
    "sample_energies",
    "simulate_ser",
    "gaussianity_report",
    "BLOCK_TRIALS",
]

BLOCK_TRIALS = 4096


def _kernel_args(params: SystemParams):
    mu_h = math.sqrt(params.mu_h_sq)
    sd_h = math.sqrt(params.sigma_h2 / 2.0)
    sd_z = math.sqrt(params.sigma_z2 / 2.0)
    return mu_h, sd_h, sd_z


def _block_bitgen(seed: int, key: int, block: int):
    ss = np.random.SeedSequence(seed, spawn_key=(key, block))
    return np.random.PCG64DXSM(ss)


def sample_energies(params: SystemParams, p_m: float, size: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` independent realisations of ``y_tilde`` for power ``p_m``."""
    if not p_m >= 0:
        raise DomainError(f"symbol power must be >= 0, got {p_m!r}")
    out = np.empty(int(size))
    _backend.sample_energies(rng.bit_generator, float(p_m),
                             *_kernel_args(params), params.N, out)
    return out


def sample_energy(params: SystemParams, p_m: float,
                  rng: np.random.Generator) -> float:
    """One realisation of the averaged receive energy."""
    return float(sample_energies(params, p_m, 1, rng)[0])


@dataclass(frozen=True)
class _BlockTally:
    n: int
    errors: int
    # power sums of (y_tilde - analytic mean), orders 1..4
    sums: tuple


def _run_block(params, p_m, mu_ref, boundaries, seed, key, block, n):
    out = np.empty(n)
    _backend.sample_energies(_block_bitgen(seed, key, block), float(p_m),
                             *_kernel_args(params), params.N, out)
    errors = int(np.count_nonzero(decide(out, boundaries) != key))
    d = out - mu_ref
    d2 = d * d
    sums = (float(d.sum()), float(d2.sum()), float((d2 * d).sum()),
            float((d2 * d2).sum()))
    return _BlockTally(n, errors, sums)


def _run_symbol(params, p_m, boundaries, trials, seed, key, workers):
    mu_ref = p_m + params.sigma_z2
    sizes = [BLOCK_TRIALS] * (trials // BLOCK_TRIALS)
    if trials % BLOCK_TRIALS:
        sizes.append(trials % BLOCK_TRIALS)
    jobs = [(params, p_m, mu_ref, boundaries, seed, key, b, n)
            for b, n in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(lambda a: _run_block(*a), jobs))
    else:
        tallies = [_run_block(*a) for a in jobs]
    # merge in block order for reproducibility
    errors = sum(t.errors for t in tallies)
    sums = [0.0] * 4
    for t in tallies:
        for i in range(4):
            sums[i] += t.sums[i]
    return errors, _Moments.from_sums(trials, mu_ref, sums)


@dataclass(frozen=True)
class _Moments:
    mean: float
    var: float
    m4: float  # fourth central moment

    @classmethod
    def from_sums(cls, n, shift, sums):
        s1, s2, s3, s4 = (s / n for s in sums)
        var = s2 - s1 * s1
        m4 = s4 - 4 * s1 * s3 + 6 * s1 * s1 * s2 - 3 * s1 ** 4
        return cls(shift + s1, var, m4)


@dataclass(frozen=True)
class SimResult:
    """Outcome of :func:`simulate_ser`."""

    trials_per_symbol: int
    errors_per_symbol: tuple
    empirical_ser: float
    std_error: float
    empirical_moments: tuple  # ((mean, variance), ...) per symbol
    seed: int
    fourth_moments: tuple = ()

    def moment_z_scores(self, constellation: Constellation,
                        params: SystemParams):
        """
        Standardised deviations of the empirical mean and variance of each
        symbol from the closed-form moments, as ``[(z_mean, z_var), ...]``.
        """
        n = self.trials_per_symbol
        z = []
        for p_m, (mean, var), m4 in zip(constellation.powers,
                                        self.empirical_moments,
                                        self.fourth_moments):
            st = energy_stats(params, float(p_m))
            se_mean = math.sqrt(st.sigma2 / n)
            se_var = math.sqrt(max(m4 - var * var, 0.0) / n)
            z.append(((mean - st.mu) / se_mean,
                      (var - st.sigma2) / se_var if se_var > 0 else 0.0))
        return z


def simulate_ser(constellation: Constellation, boundaries: Boundaries,
                 params: SystemParams, trials_per_symbol: int,
                 seed: int = 42, workers: int = 1) -> SimResult:
    """
    Empirical symbol error rate of the threshold detector.

    Each symbol is sent ``trials_per_symbol`` times; a trial is an error when
    :func:`~energysimo.detector.decide` returns another symbol. Output is a
    pure function of the inputs and ``seed``; ``workers`` only changes speed.
    """
    _check_sizes(constellation, boundaries, params)
    trials = int(trials_per_symbol)
    if trials < 1:
        raise DomainError("trials_per_symbol must be >= 1")
    errors, moments = [], []
    for m in range(1, constellation.M + 1):
        e, mom = _run_symbol(params, float(constellation.powers[m - 1]),
                             boundaries, trials, seed, m, workers)
        errors.append(e)
        moments.append(mom)
    total = constellation.M * trials
    ser = sum(errors) / total
    return SimResult(
        trials_per_symbol=trials,
        errors_per_symbol=tuple(errors),
        empirical_ser=ser,
        std_error=math.sqrt(ser * (1.0 - ser) / total),
        empirical_moments=tuple((mo.mean, mo.var) for mo in moments),
        seed=seed,
        fourth_moments=tuple(mo.m4 for mo in moments),
    )


@dataclass(frozen=True)
class GaussianityReport:
    """
    Agreement of sampled ``y_tilde`` with the ``N(mu_m, sigma2_m)`` model.

    ``*_z`` fields are deltas divided by their standard errors;
    ``q01_delta``/``q99_delta`` are quantile deltas in units of ``sigma_m``.
    """

    draws: int
    mu: float
    sigma2: float
    mean: float
    var: float
    mean_z: float
    var_z: float
    q01: float
    q99: float
    q01_delta: float
    q99_delta: float
    q01_z: float
    q99_z: float
    seed: int

    def moments_ok(self, z_max: float = 3.0) -> bool:
        return abs(self.mean_z) <= z_max and abs(self.var_z) <= z_max

    def quantiles_ok(self, z_max: float = 3.0) -> bool:
        return abs(self.q01_z) <= z_max and abs(self.q99_z) <= z_max


def gaussianity_report(params: SystemParams, p_m: float, draws: int,
                       seed: int = 42) -> GaussianityReport:
    """Compare sampled moments and 1%/99% quantiles with the Gaussian model."""
    draws = int(draws)
    if draws < 1000:
        raise DomainError("need at least 1000 draws")
    parts = []
    for b, start in enumerate(range(0, draws, BLOCK_TRIALS)):
        n = min(BLOCK_TRIALS, draws - start)
        out = np.empty(n)
        _backend.sample_energies(_block_bitgen(seed, 0, b), float(p_m),
                                 *_kernel_args(params), params.N, out)
        parts.append(out)
    y = np.concatenate(parts)
    st = energy_stats(params, p_m)
    sd = st.sigma
    d = y - st.mu
    s1 = d.mean()
    var = float(np.mean((d - s1) ** 2))
    m4 = float(np.mean((d - s1) ** 4))
    mean_z = s1 / math.sqrt(st.sigma2 / draws)
    var_z = (var - st.sigma2) / math.sqrt(max(m4 - var * var, 1e-300) / draws)

    q01, q99 = (float(v) for v in np.quantile(y, [0.01, 0.99]))
    qz = {}
    for q, emp in ((0.01, q01), (0.99, q99)):
        pred = st.mu + sd * sps.norm.ppf(q)
        # asymptotic standard error of a sample quantile
        se = math.sqrt(q * (1 - q) / draws) / (sps.norm.pdf(sps.norm.ppf(q)) / sd)
        qz[q] = ((emp - pred) / sd, (emp - pred) / se)
    return GaussianityReport(
        draws=draws, mu=st.mu, sigma2=st.sigma2,
        mean=float(st.mu + s1), var=var, mean_z=float(mean_z),
        var_z=float(var_z), q01=q01, q99=q99,
        q01_delta=qz[0.01][0], q99_delta=qz[0.99][0],
        q01_z=qz[0.01][1], q99_z=qz[0.99][1], seed=seed,
    )
