import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from tfrac.covmodel import CovarianceModel, DegenerateVarianceError, bm_limit_variance
from tfrac.sampler import Method, SamplePath, sample_noise, sample_path
from tfrac.stats import (
    HermiteSpec,
    TooFewSamplesError,
    derive_seed,
    edgeworth_check,
    empirical_autocov,
    exact_variance,
    hermite_variation,
    ks_distance,
    normalized_statistic,
    p_variation,
    quadratic_variation_cumulants,
    rate_regression,
    sample_cumulants,
    variation_replicates,
)


def test_hermite_spec():
    f = HermiteSpec({3: 0.5, 2: 1.0, 5: 0.0})
    assert f.rank == 2 and f.degree == 3
    assert list(f.coefficients) == [2, 3]
    assert f(2.0) == pytest.approx(3.0 + 0.5 * 2.0)
    for bad in ({}, {0: 1.0}, {2: math.inf}):
        with pytest.raises(ValueError):
            HermiteSpec(bad)


def test_hermite_variation_linear_is_gaussian_sum(bm_half):
    noise = sample_noise(bm_half, 1000, 3)
    v = hermite_variation(noise, bm_half, HermiteSpec.single(1))
    assert v == pytest.approx(np.sum(noise.values) / math.sqrt(bm_half.c1_squared) / math.sqrt(1000))
    other = CovarianceModel.of("II", 0.5, 1.0)
    with pytest.raises(ValueError):
        hermite_variation(noise, other, HermiteSpec.single(1))


def test_variation_replicates_mean_zero(bm_half):
    v = variation_replicates(bm_half, HermiteSpec.single(2), 1 << 10, 8, 400, threads=1)
    assert abs(v.mean()) <= 4 * v.std(ddof=1) / math.sqrt(len(v))


def test_linear_variance_kind1_vanishes():
    # sum_k gamma(k) telescopes to 0 for the first kind, so Var(V_n) = Var(B_n) / (n C_1^2)
    m = CovarianceModel.of("I", 0.4, 1.0)
    f = HermiteSpec.single(1)
    assert abs(bm_limit_variance(m, f)) <= 1e-12
    n = 1 << 12
    assert n * exact_variance(m, f, n) == pytest.approx(m.variance(float(n)) / m.c1_squared, rel=1e-8)


def test_degenerate_variance_guard(monkeypatch, bm_half):
    import tfrac.stats as stats_mod

    monkeypatch.setattr(stats_mod, "finite_n_variance", lambda *a: 1e-16)
    with pytest.raises(DegenerateVarianceError):
        normalized_statistic(0.3, bm_half, HermiteSpec.single(2), 64)


def test_brownian_second_kind_normalization():
    m = CovarianceModel.of("II", 0.5, 1.0)
    assert normalized_statistic(1.0, m, HermiteSpec.single(2), 777) == pytest.approx(1 / math.sqrt(2))


def test_cumulants_gaussian():
    z = np.random.default_rng(1).standard_normal(100_000)
    c = sample_cumulants(z)
    assert abs(c.k3) <= 4 * c.se3 and abs(c.k4) <= 4 * c.se4
    assert c.k2 == pytest.approx(1.0, abs=4 * c.se2)


def test_cumulants_chi_square():
    z = np.random.default_rng(2).standard_normal(1_000_000)
    c = sample_cumulants(z * z - 1)
    assert abs(c.k3 - 8.0) <= 4 * c.se3
    assert abs(c.k4 - 48.0) <= 4 * c.se4


def test_cumulants_unbiased_small_sample():
    # k-statistics are exact for any sample size on expectation; check algebra on a fixed set
    x = np.array([0.3, -1.2, 2.5, 0.7, -0.4, 1.9, -2.2, 0.05] * 5)
    from scipy.stats import kstat

    c = sample_cumulants(x)
    assert c.k2 == pytest.approx(kstat(x, 2)) and c.k3 == pytest.approx(kstat(x, 3)) and c.k4 == pytest.approx(kstat(x, 4))


def test_cumulants_errors():
    with pytest.raises(TooFewSamplesError):
        sample_cumulants(np.ones(10))
    with pytest.raises(DegenerateVarianceError):
        sample_cumulants(np.full(100, 2.5))


def test_p_variation():
    t = np.linspace(0, 1, 101)
    assert p_variation(3.0 * t, 1.0) == pytest.approx(3.0)
    path = SamplePath(None, 0.01, 3.0 * t, 0, Method.CIRCULANT)
    assert p_variation(path, 1.0) == pytest.approx(3.0)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=40), st.floats(1.0, 4.0), st.integers(0, 2**32 - 1))
def test_p_variation_triangle(xs, beta, seed):
    x = np.array(xs)
    y = np.random.default_rng(seed).standard_normal(len(x))
    lhs = p_variation(x + y, beta) ** (1 / beta)
    assert lhs <= p_variation(x, beta) ** (1 / beta) + p_variation(y, beta) ** (1 / beta) + 1e-9


def test_ks_distance():
    m = 500
    grid = special.ndtri((np.arange(1, m + 1) - 0.5) / m)
    assert ks_distance(grid) <= 1 / (2 * m) + 1e-12
    rng = np.random.default_rng(3)
    assert ks_distance(rng.standard_normal(10_000)) <= 0.025
    assert ks_distance(rng.standard_normal(10_000) + 0.5) >= 0.15
    with pytest.raises(TooFewSamplesError):
        ks_distance(np.zeros(50))
    with pytest.raises(ValueError):
        ks_distance(grid, "Cauchy")


def test_rate_regression():
    ns = [2**e for e in range(4, 12)]
    s, se = rate_regression([(n, 3.0 * n**-0.5) for n in ns])
    assert s == pytest.approx(-0.5, abs=1e-12) and se < 1e-10
    assert rate_regression([(n, 0.2 / n) for n in ns]).slope == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        rate_regression([(n, 1.0) for n in ns[:3]])
    with pytest.raises(ValueError):
        rate_regression([(n, -1.0) for n in ns])


def test_exact_quadratic_cumulants(bm_half):
    from tfrac.covmodel import exact_asymptotic_profile

    rho, _ = exact_asymptotic_profile(bm_half, 2, 0.0)
    k3, k4 = quadratic_variation_cumulants(bm_half, 1 << 14)
    assert k3 * math.sqrt(1 << 14) == pytest.approx(2 * rho, rel=1e-3)
    k3b, k4b = quadratic_variation_cumulants(bm_half, 1 << 13)
    assert k4b / k4 == pytest.approx(2.0, rel=1e-3)


def test_fn_variance_near_one(bm_half):
    n = 1 << 12
    f = HermiteSpec.single(2)
    fn = variation_replicates(bm_half, f, n, 99, 1000, threads=1) / math.sqrt(exact_variance(bm_half, f, n))
    assert np.var(fn, ddof=1) == pytest.approx(1.0, abs=0.1)


def test_pvar_half(bm_half):
    n = 1 << 12
    s = [p_variation(sample_path(bm_half, n, 1.0 / n, 5, r), 2.0) for r in range(100)]
    assert np.mean(s) == pytest.approx(1.0, rel=0.03)


def test_derive_seed():
    a = derive_seed(1, 0)
    assert a != derive_seed(1, 1) and a == derive_seed(1, 0) and 0 <= a < 2**64


def test_edgeworth_smoke(bm_half):
    rep = edgeworth_check(bm_half, 2, [-1.0, 1.0], [256], 400, seed=4, threads=1)
    assert len(rep.records) == 2
    assert all(r["target"] == 0.0 for r in rep.records)
    assert rep.rho == pytest.approx(1.6565597458, rel=1e-8)


def test_empirical_autocov_matches_direct():
    x = np.random.default_rng(6).standard_normal(50)
    direct = [np.dot(x[: 50 - k], x[k:]) / (50 - k) for k in range(6)]
    assert np.allclose(empirical_autocov(x, 5), direct, rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        empirical_autocov(x, 50)
