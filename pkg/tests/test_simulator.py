import math

import numpy as np
import pytest

from energysimo.detector import Boundaries, average_sep, optimal_boundaries
from energysimo.errors import DomainError, ValidationError
from energysimo.model import SystemParams, energy_stats, validate_constellation
from energysimo.optimizer import init_powers, optimize
from energysimo.simulator import (BLOCK_TRIALS, gaussianity_report,
                                  sample_energies, sample_energy,
                                  simulate_ser)


def test_sample_energy_scalar():
    pr = SystemParams(K=1, N=16, sigma_z2=1, M=2, p_bar=1)
    y = sample_energy(pr, 1.0, np.random.default_rng(0))
    assert isinstance(y, float) and y > 0


def test_sample_energy_rejects_negative_power():
    pr = SystemParams(K=1, N=16, sigma_z2=1, M=2, p_bar=1)
    with pytest.raises(DomainError):
        sample_energy(pr, -1.0, np.random.default_rng(0))


def test_noise_only_mean():
    pr = SystemParams(K=0, N=10, sigma_z2=1.7, M=2, p_bar=1)
    y = sample_energies(pr, 0.0, 1_000_000, np.random.default_rng(1))
    se = math.sqrt(energy_stats(pr, 0.0).sigma2 / len(y))
    assert abs(y.mean() - 1.7) <= 3 * se


def test_deterministic_channel_limit():
    pr = SystemParams(K=1e9, N=500, sigma_z2=1e-12, M=2, p_bar=1)
    y = sample_energies(pr, 1.0, 200, np.random.default_rng(2))
    assert np.max(np.abs(y - 1.0)) <= 1e-4


@pytest.mark.parametrize("N", [1, 2, 500])
def test_exact_moments_any_n(N):
    # 1e7 channel draws in total at N = 500; the closed-form moments are exact
    # for every N, so small N must agree as well
    pr = SystemParams(K=50, N=N, sigma_z2=1, M=2, p_bar=1)
    n = 10_000_000 // N
    y = sample_energies(pr, 2.0, n, np.random.default_rng(3))
    st = energy_stats(pr, 2.0)
    var = y.var()
    m4 = np.mean((y - y.mean()) ** 4)
    assert abs(y.mean() - st.mu) <= 3 * math.sqrt(st.sigma2 / n)
    assert abs(var - st.sigma2) <= 3 * math.sqrt((m4 - var ** 2) / n)


def test_vanishing_noise_no_errors():
    pr = SystemParams(K=50, N=200, sigma_z2=1e-6, M=4, p_bar=1.0)
    c = init_powers(pr)
    b = optimal_boundaries(c, pr)
    res = simulate_ser(c, b, pr, 100_000, seed=5)
    assert res.errors_per_symbol == (0, 0, 0, 0)
    assert res.empirical_ser == 0.0


def test_m2_desk_agrees_with_analytic():
    pr = SystemParams.from_snr_db(K=50, N=500, M=2, snr_db=0.0)
    r = optimize(pr)
    res = simulate_ser(r.constellation, r.boundaries, pr, 100_000, seed=6)
    # analytic SEP is ~1e-42 here: no errors are expected, and the empirical
    # standard error is zero, so compare against the null-hypothesis spread
    n = 2 * res.trials_per_symbol
    null_se = math.sqrt(r.sep * (1 - r.sep) / n)
    assert res.errors_per_symbol == (0, 0)
    assert abs(res.empirical_ser - r.sep) <= 5 * max(res.std_error, null_se)


def test_simulate_ser_reproducible():
    pr = SystemParams.from_snr_db(K=0, N=40, M=4, snr_db=-3.0)
    c = init_powers(pr)
    b = optimal_boundaries(c, pr)
    a = simulate_ser(c, b, pr, 3 * BLOCK_TRIALS + 17, seed=11)
    bb = simulate_ser(c, b, pr, 3 * BLOCK_TRIALS + 17, seed=11)
    cc = simulate_ser(c, b, pr, 3 * BLOCK_TRIALS + 17, seed=11, workers=3)
    assert a == bb == cc
    d = simulate_ser(c, b, pr, 3 * BLOCK_TRIALS + 17, seed=12)
    assert d != a


def test_simulate_ser_fields_consistent():
    pr = SystemParams.from_snr_db(K=0, N=20, M=4, snr_db=-6.0)
    c = init_powers(pr)
    b = optimal_boundaries(c, pr)
    res = simulate_ser(c, b, pr, 20_000, seed=1)
    total = 4 * 20_000
    assert res.empirical_ser == sum(res.errors_per_symbol) / total
    assert res.std_error == pytest.approx(
        math.sqrt(res.empirical_ser * (1 - res.empirical_ser) / total))
    assert 0 < res.empirical_ser < 1
    # at N = 20 the Gaussian model is rough but the SER must be in range
    assert res.empirical_ser == pytest.approx(average_sep(c, b, pr), rel=0.3)
    for z_mean, z_var in res.moment_z_scores(c, pr):
        assert abs(z_mean) <= 4 and abs(z_var) <= 4


def test_simulate_ser_shape_mismatch():
    pr = SystemParams.from_snr_db(K=0, N=20, M=4, snr_db=0.0)
    c = init_powers(pr)
    with pytest.raises(ValidationError):
        simulate_ser(c, Boundaries([1.0, 2.0]), pr, 10)


def test_simulate_ser_needs_trials():
    pr = SystemParams.from_snr_db(K=0, N=20, M=2, snr_db=0.0)
    c = init_powers(pr)
    with pytest.raises(DomainError):
        simulate_ser(c, optimal_boundaries(c, pr), pr, 0)


def test_errors_counted_through_decision_regions():
    # coarse regime with many errors: compare with a direct count
    pr = SystemParams.from_snr_db(K=0, N=4, M=3, snr_db=0.0)
    c = validate_constellation([0.0, 1.0, 2.0], pr)
    b = optimal_boundaries(c, pr)
    res = simulate_ser(c, b, pr, 4000, seed=9)  # a single block
    from energysimo.simulator import _block_bitgen
    from energysimo import _backend
    expected = []
    for m, p in enumerate(c.powers, start=1):
        y = np.empty(4000)
        _backend.sample_energies(_block_bitgen(9, m, 0), p, 0.0,
                                 math.sqrt(0.5), math.sqrt(0.5), 4, y)
        lo, hi = b.region(m)
        expected.append(int(np.count_nonzero((y < lo) | (y >= hi))))
    assert res.errors_per_symbol == tuple(expected)


# -- Gaussianity ---------------------------------------------------------------

@pytest.mark.slow
def test_gaussianity_large_n():
    pr = SystemParams.from_snr_db(K=0, N=500, M=2, snr_db=0.0)
    rep = gaussianity_report(pr, pr.p_bar, 1_000_000, seed=42)
    assert rep.moments_ok(3.0)


def test_gaussianity_small_n_shape_deviates():
    pr = SystemParams.from_snr_db(K=0, N=2, M=2, snr_db=0.0)
    rep = gaussianity_report(pr, pr.p_bar, 1_000_000, seed=42)
    assert rep.moments_ok(3.0)
    # y_tilde is a scaled chi-square with 4 degrees of freedom: strongly
    # right-skewed, so the Gaussian quantiles are far off
    assert not rep.quantiles_ok(3.0)
    assert rep.q01_delta > 0.3


def test_gaussianity_seed_independent_contract():
    pr = SystemParams.from_snr_db(K=50, N=100, M=2, snr_db=0.0)
    a = gaussianity_report(pr, 1.0, 100_000, seed=1)
    b = gaussianity_report(pr, 1.0, 100_000, seed=2)
    assert a.mean_z != b.mean_z
    assert a.moments_ok(3.0) and b.moments_ok(3.0)


def test_gaussianity_needs_draws():
    pr = SystemParams.from_snr_db(K=0, N=2, M=2, snr_db=0.0)
    with pytest.raises(DomainError):
        gaussianity_report(pr, 1.0, 999)
