import math

import pytest

from tfrac.covmodel import CovarianceModel, ProcessParams, cov
from tfrac.oracle import (
    QuadratureControl,
    cov_quadrature,
    kernel,
    lemma_a1_integral,
    noise_autocov_quadrature,
)

E = math.e


def test_kernel_trivial():
    for kind in ("I", "II"):
        p = ProcessParams(kind, 0.7, 1.3)
        assert kernel(p, 0.0, -0.4) == 0.0
        assert kernel(p, 0.0, 0.4) == 0.0
    assert kernel(ProcessParams("I", 0.3, 1.0), 1.0, 2.0) == 0.0


def test_kernel_half():
    lam = 1.7
    p = ProcessParams("I", 0.5, lam)
    # for 0 < x < t only the first term survives: e^{-lam (t - x)}
    assert kernel(p, 1.0, 0.5) == pytest.approx(math.exp(-0.5 * lam))
    # for x < 0 the kernel is e^{lam x} (e^{-lam t} - 1)
    assert kernel(p, 1.0, -0.8) == pytest.approx(math.exp(-0.8 * lam) * (math.exp(-lam) - 1))
    # second kind at H = 1/2 is the Brownian kernel 1_{(0, t]}
    p2 = ProcessParams("II", 0.5, lam)
    assert kernel(p2, 1.0, 0.3) == pytest.approx(1.0, rel=1e-12)
    assert kernel(p2, 1.0, -2.0) == pytest.approx(0.0, abs=1e-14)


def test_cov_quadrature_examples():
    p = ProcessParams("I", 0.5, 1.0)
    assert cov_quadrature(p, 0.0, 0.0) == (0.0, 0.0)
    val, err = cov_quadrature(p, 1.0, 2.0)
    assert val == pytest.approx(0.5 * (1 - E**-2), abs=1e-8)
    assert err < 1e-8
    q = ProcessParams("II", 0.3, 0.7)
    assert cov_quadrature(q, 0.6, 2.5)[0] == pytest.approx(cov_quadrature(q, 2.5, 0.6)[0], rel=1e-9)
    with pytest.raises(ValueError):
        cov_quadrature(p, -1.0, 1.0)


@pytest.mark.parametrize("kind", ["I", "II"])
@pytest.mark.parametrize("h", [0.25, 0.8, 1.6])
def test_noise_quadrature_bilinearity(kind, h):
    p = ProcessParams(kind, h, 0.6)
    for k in (0, 1, 4):
        g = noise_autocov_quadrature(p, k)[0]
        c = lambda a, b: cov_quadrature(p, a, b)[0]  # noqa: E731
        expect = c(k + 1, 1) - c(k, 1) - c(k + 1, 0) + c(k, 0) if k else c(1, 1)
        assert g == pytest.approx(expect, abs=1e-8)


def test_noise_quadrature_half():
    lam = 1.0
    assert noise_autocov_quadrature(ProcessParams("I", 0.5, lam), 2)[0] == pytest.approx(E**-2 * (1 - math.cosh(1)), abs=1e-9)
    assert noise_autocov_quadrature(ProcessParams("II", 0.5, 2.3), 3)[0] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("kind", ["I", "II"])
def test_quadrature_matches_closed_form_spot(kind):
    p = ProcessParams(kind, 0.85, 0.4)
    m = CovarianceModel(p)
    for s, t in ((0.3, 3.0), (1.0, 1.0), (4.0, 7.5)):
        assert cov_quadrature(p, s, t)[0] == pytest.approx(cov(p, s, t), rel=1e-8)
    for k in (0, 2, 9):
        assert noise_autocov_quadrature(p, k)[0] == pytest.approx(m.autocov(k), abs=1e-10)


def test_error_estimates_honest():
    # tightening the tolerance moves the value by less than the looser error estimate
    loose = QuadratureControl(abs_tol=1e-9, rel_tol=1e-7)
    tight = QuadratureControl(abs_tol=1e-13, rel_tol=1e-11)
    hits = total = 0
    for kind in ("I", "II"):
        for h in (0.3, 0.7, 1.2):
            for lam in (0.1, 1.0):
                p = ProcessParams(kind, h, lam)
                v1, e1 = cov_quadrature(p, 0.5, 2.0, loose)
                v2, _ = cov_quadrature(p, 0.5, 2.0, tight)
                total += 1
                hits += abs(v1 - v2) <= max(e1, 1e-15)
    assert hits >= 0.95 * total


def test_quadrature_control_validation():
    with pytest.raises(ValueError):
        QuadratureControl(abs_tol=1e-3)
    with pytest.raises(ValueError):
        QuadratureControl(abs_tol=1e-13, tail_factor=5.0)


def test_lemma_a1():
    v1, err = lemma_a1_integral(0.5, 1.0)
    assert math.isfinite(v1) and err < 1e-8
    # at H = 1/2 the integral is 2 log(2) / lambda
    assert v1 == pytest.approx(2 * math.log(2), rel=1e-9)
    bound_half = 2 * math.gamma(0.25) ** 2 * (1 / 2) ** -0.5 + 1.0
    assert v1 <= bound_half
    assert lemma_a1_integral(0.5, 2.0)[0] < v1
    h = 0.75
    assert lemma_a1_integral(h, 1.0)[0] <= 2 ** (2 * h - 1) * math.gamma(h - 0.5) ** 2
    h = 0.3
    assert lemma_a1_integral(h, 1.0)[0] <= (h - 0.5) ** -2 * 2 ** (-2 * h) * math.gamma(2 * h)
