import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from energysimo.detector import (Boundaries, average_sep, average_sep_pairwise,
                                 conditional_pdf, decide, optimal_boundaries,
                                 optimal_boundary, pair_error_h,
                                 per_symbol_error, q_function)
from energysimo.errors import (DegenerateSpacingError, DomainError,
                               ValidationError)
from energysimo.model import (Constellation, EnergyStats, SystemParams,
                              energy_stats, validate_constellation)
from oracles import (crossing_mp, golden_boundary_mp, golden_section,
                     log_gauss_pdf, log_pair_error, q_mp, variance)

# mpmath reference values (40 digits)
LAMBDA_M2 = 1.5163020138920636  # crossing for p=[0, 2], N=100, K=0
Q_1_6448536 = 0.05000000277965746
PE1_M2 = 1.2149849259097895e-07  # Q(5.16302013892...)
PE2_M2 = 3.794316417383109e-07   # Q(4.94565995369...)


# -- Q-function ------------------------------------------------------------

def test_q_zero():
    assert q_function(0.0) == 0.5


def test_q_limits():
    assert abs(q_function(40.0)) <= 1e-15
    assert abs(q_function(-40.0) - 1.0) <= 1e-15


def test_q_quantile():
    assert q_function(1.6448536) == pytest.approx(Q_1_6448536, rel=1e-13)
    assert q_function(1.6448536) == pytest.approx(0.05, abs=1e-8)


def test_q_nan():
    with pytest.raises(DomainError):
        q_function(float("nan"))


def test_q_relative_accuracy_against_mpmath():
    worst = 0.0
    for x in np.linspace(-38, 38, 1521):
        ref = float(q_mp(x))
        if ref < 1e-300:
            assert q_function(x) == 0.0
            continue
        worst = max(worst, abs(q_function(x) - ref) / ref)
    assert worst <= 1e-12


def test_q_array():
    x = np.array([-1.0, 0.0, 1.0])
    q = q_function(x)
    assert q.shape == (3,)
    assert q[1] == 0.5


@given(st.floats(-10, 10))
def test_q_complement(x):
    assert abs(q_function(x) + q_function(-x) - 1.0) <= 1e-14


# -- conditional pdf -------------------------------------------------------

def test_pdf_peak_and_one_sigma():
    s = EnergyStats(mu=2.0, sigma2=0.04)
    peak = 1 / math.sqrt(2 * math.pi * 0.04)
    assert conditional_pdf(2.0, s) == pytest.approx(peak, rel=1e-15)
    assert conditional_pdf(2.2, s) == pytest.approx(peak * math.exp(-0.5),
                                                    rel=1e-14)


def test_pdf_integrates_to_one():
    s = EnergyStats(mu=3.0, sigma2=0.09)
    total, _ = integrate.quad(lambda y: conditional_pdf(y, s), -np.inf, np.inf,
                              epsabs=1e-13, epsrel=1e-13)
    assert abs(total - 1.0) <= 1e-9


def test_pdf_bad_variance():
    with pytest.raises(DomainError):
        conditional_pdf(1.0, EnergyStats(mu=1.0, sigma2=0.0))


# -- boundaries ------------------------------------------------------------

def m2(params):
    return validate_constellation([0.0, 2.0], params)


def test_boundary_m2_example(m2_example):
    lam = optimal_boundary(1, m2(m2_example), m2_example)
    assert lam == pytest.approx(LAMBDA_M2, abs=1e-12)


def test_boundary_m2_golden_section(m2_example):
    lam = optimal_boundary(1, m2(m2_example), m2_example)
    ref = golden_section(
        lambda x: log_pair_error(x, 0.0, 2.0, 0, 100, 1.0), 1.0, 3.0)
    assert abs(lam - ref) <= 1e-8


def test_boundary_pdf_equality(m2_example):
    c = m2(m2_example)
    lam = optimal_boundary(1, c, m2_example)
    a = conditional_pdf(lam, energy_stats(m2_example, 0.0))
    b = conditional_pdf(lam, energy_stats(m2_example, 2.0))
    assert a == pytest.approx(b, rel=1e-9)


def test_boundary_index_range(m2_example):
    with pytest.raises(DomainError):
        optimal_boundary(2, m2(m2_example), m2_example)


def test_boundary_degenerate_spacing():
    params = SystemParams(K=0, N=100, sigma_z2=1, M=2, p_bar=1)
    c = Constellation(powers=np.array([1.0, 1.0 + 1e-14]), p_bar=1.0)
    with pytest.raises(DegenerateSpacingError):
        optimal_boundary(1, c, params)


def test_boundaries_m3_interleave():
    params = SystemParams(K=0, N=100, sigma_z2=1, M=3, p_bar=1.5)
    c = validate_constellation([0, 1.5, 3.0], params)
    lam = optimal_boundaries(c, params).lambdas
    mu = c.powers + 1
    assert mu[0] < lam[0] < mu[1] < lam[1] < mu[2]


def test_boundaries_m3_grid_oracle():
    params = SystemParams(K=0, N=100, sigma_z2=1, M=3, p_bar=1.0)
    c = validate_constellation([0, 1.0, 2.0], params)
    mu = c.powers + 1
    g1 = np.linspace(mu[0], mu[1], 801)
    g2 = np.linspace(mu[1], mu[2], 801)
    L1, L2 = np.meshgrid(g1, g2, indexing="ij")
    sd = np.sqrt([energy_stats(params, p).sigma2 for p in c.powers])

    def Q(x):  # oracle Q through mpmath-free scipy route
        from scipy.special import ndtr
        return ndtr(-x)

    pe = (Q((L1 - mu[0]) / sd[0]) + Q((mu[1] - L1) / sd[1])
          + Q((L2 - mu[1]) / sd[1]) + Q((mu[2] - L2) / sd[2])) / 3
    i, j = np.unravel_index(np.argmin(pe), pe.shape)
    lam = optimal_boundaries(c, params).lambdas
    assert abs(lam[0] - g1[i]) <= g1[1] - g1[0]
    assert abs(lam[1] - g2[j]) <= g2[1] - g2[0]


def random_instance(rng):
    K = float(rng.choice([0.0, 1.0, 50.0]))
    N = int(rng.integers(50, 2001))
    M = int(rng.integers(2, 9))
    snr_db = float(rng.uniform(-10, 10))
    params = SystemParams.from_snr_db(K=K, N=N, M=M, snr_db=snr_db)
    p = np.sort(rng.dirichlet(np.ones(M))) * M * params.p_bar
    return params, validate_constellation(p * (1 - 1e-12), params)


def crossing_inside(pa, pb, K, N, s):
    """Densities cross before mu_b iff f_a(mu_b) <= f_b(mu_b)."""
    va, vb = variance(pa, K, N, s), variance(pb, K, N, s)
    return log_gauss_pdf(pb + s, pa + s, va) <= log_gauss_pdf(pb + s, pb + s, vb)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_boundary_matches_golden_and_mpmath(seed):
    params, c = random_instance(np.random.default_rng(seed))
    lam = optimal_boundaries(c, params).lambdas
    K, N, s = params.K, params.N, params.sigma_z2
    for m in range(params.M - 1):
        pa, pb = c.powers[m], c.powers[m + 1]
        width = pb - pa
        ref = golden_boundary_mp(pa, pb, K, N, s)
        assert abs(lam[m] - ref) <= 1e-6 * width
        if not crossing_inside(pa, pb, K, N, s):
            assert lam[m] == pb + s
            continue
        assert abs(lam[m] - float(crossing_mp(pa, pb, K, N, s))) <= 1e-9 * width
        la = log_gauss_pdf(lam[m], pa + s, energy_stats(params, pa).sigma2)
        lb = log_gauss_pdf(lam[m], pb + s, energy_stats(params, pb).sigma2)
        assert abs(la - lb) <= 1e-9


def test_boundary_clipped_when_densities_do_not_cross():
    params = SystemParams(K=0, N=50, sigma_z2=1, M=2, p_bar=1.005)
    c = validate_constellation([1.0, 1.01], params)
    assert not crossing_inside(1.0, 1.01, 0, 50, 1.0)
    lam = optimal_boundary(1, c, params)
    assert lam == 2.01
    ref = golden_section(lambda x: log_pair_error(x, 1.0, 1.01, 0, 50, 1.0),
                         2.0, 2.01)
    assert abs(lam - ref) <= 1e-8


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_boundaries_within_means(seed):
    params, c = random_instance(np.random.default_rng(seed))
    lam = optimal_boundaries(c, params).lambdas
    mu = c.powers + params.sigma_z2
    assert np.all(mu[:-1] <= lam) and np.all(lam <= mu[1:])


# -- error probabilities ---------------------------------------------------

def test_per_symbol_error_m2(m2_example):
    c = m2(m2_example)
    b = optimal_boundaries(c, m2_example)
    assert per_symbol_error(1, c, b, m2_example) == pytest.approx(PE1_M2,
                                                                  rel=1e-9)
    assert per_symbol_error(2, c, b, m2_example) == pytest.approx(PE2_M2,
                                                                  rel=1e-9)
    assert per_symbol_error(1, c, b, m2_example) == pytest.approx(1.2e-7,
                                                                  rel=0.02)


def test_per_symbol_error_boundary_at_mean(m2_example):
    c = m2(m2_example)
    b = Boundaries([1.0])
    assert per_symbol_error(1, c, b, m2_example) == 0.5


def test_per_symbol_error_interior_all_at_mean():
    params = SystemParams(K=0, N=100, sigma_z2=1, M=3, p_bar=1)
    c = validate_constellation([0, 1, 2], params)
    # lambda_1 = mu_2 = lambda_2 cannot be a strictly increasing Boundaries,
    # so squeeze to within one ulp
    mu2 = 2.0
    b = Boundaries([mu2, np.nextafter(mu2, 3.0)])
    assert per_symbol_error(2, c, b, params) == pytest.approx(1.0, abs=1e-12)


def test_per_symbol_error_index(m2_example):
    c = m2(m2_example)
    b = optimal_boundaries(c, m2_example)
    with pytest.raises(DomainError):
        per_symbol_error(3, c, b, m2_example)
    with pytest.raises(DomainError):
        per_symbol_error(0, c, b, m2_example)


def test_average_sep_m2(m2_example):
    c = m2(m2_example)
    b = optimal_boundaries(c, m2_example)
    ref = (float(q_mp(5.163020138920636)) + float(q_mp(4.945659953693121))) / 2
    assert average_sep(c, b, m2_example) == pytest.approx(ref, rel=1e-9)


def test_average_sep_shape_mismatch(m2_example):
    c = m2(m2_example)
    with pytest.raises(ValidationError):
        average_sep(c, Boundaries([1.2, 1.5]), m2_example)


def test_degenerate_boundaries_worse(desk_params):
    c = validate_constellation([0, 0.5, 1.25, 2.25], desk_params)
    opt = average_sep(c, optimal_boundaries(c, desk_params), desk_params)
    at_means = Boundaries(c.powers[:-1] + desk_params.sigma_z2 + 1e-12)
    assert average_sep(c, at_means, desk_params) >= opt


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_two_sep_forms_agree(seed):
    rng = np.random.default_rng(seed)
    params, c = random_instance(rng)
    mu = c.powers + params.sigma_z2
    lam = mu[:-1] + rng.uniform(0.01, 0.99, params.M - 1) * np.diff(mu)
    b = Boundaries(lam)
    assert abs(average_sep(c, b, params)
               - average_sep_pairwise(c, b, params)) <= 1e-14


def test_optimal_boundaries_beat_perturbations():
    rng = np.random.default_rng(7)
    for _ in range(20):
        params, c = random_instance(rng)
        best = optimal_boundaries(c, params)
        ref = average_sep(c, best, params)
        mu = c.powers + params.sigma_z2
        for _ in range(100):
            lam = mu[:-1] + rng.uniform(0, 1, params.M - 1) * np.diff(mu)
            assert average_sep(c, Boundaries(lam), params) >= ref


# -- pair error ------------------------------------------------------------

def test_pair_error_at_lower_mean(m2_example):
    c = m2(m2_example)
    h = pair_error_h(1.0, 1, c, m2_example)
    assert h == pytest.approx(0.5 + float(q_mp(2.0 / 0.3)), rel=1e-13)


def test_pair_error_domain(m2_example):
    with pytest.raises(DomainError):
        pair_error_h(0.99, 1, m2(m2_example), m2_example)
    with pytest.raises(DomainError):
        pair_error_h(3.01, 1, m2(m2_example), m2_example)


def test_pair_error_midpoint_not_better(m2_example):
    c = m2(m2_example)
    lam = optimal_boundary(1, c, m2_example)
    assert pair_error_h(2.0, 1, c, m2_example) >= pair_error_h(lam, 1, c,
                                                               m2_example)


def test_pair_error_convex(desk_params):
    c = validate_constellation([0, 0.5, 1.25, 2.25], desk_params)
    for m in (1, 2, 3):
        lo = c.powers[m - 1] + 1
        hi = c.powers[m] + 1
        d = (hi - lo) / 1000
        for x in np.linspace(lo + d, hi - d, 100):
            f0 = pair_error_h(x, m, c, desk_params)
            fp = pair_error_h(x + d, m, c, desk_params)
            fm = pair_error_h(x - d, m, c, desk_params)
            second = (fp - 2 * f0 + fm) / d ** 2
            assert second >= -8 * np.finfo(float).eps * f0 / d ** 2


# -- decide ----------------------------------------------------------------

def test_decide_edges():
    b = Boundaries([1.5, 2.5, 3.5])
    assert decide(0.0, b) == 1
    assert decide(10.0, b) == 4
    assert decide(3.5, b) == 4  # [lambda_{m-1}, lambda_m)


def test_decide_m2_example(m2_example):
    b = optimal_boundaries(m2(m2_example), m2_example)
    assert decide(1.5, b) == 1
    assert decide(1.52, b) == 2


def test_decide_vectorised():
    b = Boundaries([1.0, 2.0])
    np.testing.assert_array_equal(decide([0.5, 1.0, 1.5, 2.0, 7.0], b),
                                  [1, 2, 2, 3, 3])


@given(st.lists(st.floats(0, 100), min_size=2, max_size=50))
def test_decide_monotone(ys):
    b = Boundaries([1.0, 5.0, 20.0, 60.0])
    ys = sorted(ys)
    idx = decide(np.array(ys), b)
    assert np.all(np.diff(idx) >= 0)


def test_boundaries_validation():
    with pytest.raises(ValidationError):
        Boundaries([2.0, 1.0])
    with pytest.raises(ValidationError):
        Boundaries([0.0, 1.0])
    with pytest.raises(ValidationError):
        Boundaries([])
