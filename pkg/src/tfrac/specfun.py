"""Real-valued special functions used by the closed-form covariance formulas.

Everything here is scalar, pure Python and thread-safe. ``hermite_eval`` also
accepts numpy arrays because the Monte-Carlo statistics apply it to whole
noise paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpecialFunctionError",
    "DomainError",
    "PoleError",
    "SeriesConvergenceError",
    "SeriesControl",
    "gamma_fn",
    "gamma_real",
    "rgamma_series",
    "bessel_k",
    "bessel_k_scaled",
    "hyp2f3",
    "hyp2f3_with_magnitude",
    "hermite_eval",
    "abs_gaussian_moment",
]


class SpecialFunctionError(ArithmeticError):
    pass


class DomainError(SpecialFunctionError, ValueError):
    pass


class PoleError(DomainError):
    pass


class SeriesConvergenceError(SpecialFunctionError):
    pass


@dataclass(frozen=True)
class SeriesControl:
    """Termination rule for the hypergeometric series."""

    rel_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-3):
            raise ValueError(f"rel_tol must lie in (0, 1e-3], got {self.rel_tol}")
        if self.max_terms < 32:
            raise ValueError(f"max_terms must be >= 32, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()

# ---------------------------------------------------------------------------
# Gamma function
# ---------------------------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _lanczos(x: float) -> float:
    # valid for x >= 0.5
    x -= 1.0
    a = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        a += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    # split the power so t**(x+1/2) cannot overflow before e^{-t} is applied
    half = t ** (0.5 * (x + 0.5))
    return _SQRT_2PI * (half * math.exp(-t)) * half * a


def gamma_fn(x: float) -> float:
    """Gamma function for strictly positive real arguments."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"gamma_fn requires x > 0, got {x}")
    if x > 171.62:
        raise OverflowError(f"gamma_fn({x}) exceeds the double range")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _lanczos(1.0 - x))
    return _lanczos(x)


def gamma_real(x: float) -> float:
    """Gamma on the real line minus the poles, via reflection for x < 0.5.

    The second-kind variance formula evaluates Gamma(1 - H), which is negative
    for 1 < H < 2, so the covariance layer needs more than ``gamma_fn``.
    """
    x = float(x)
    if x > 0.0:
        return gamma_fn(x)
    if x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x}")
    return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))


# Taylor coefficients of 1/Gamma(z) = sum_k c_k z^k (Abramowitz & Stegun 6.1.34).
_RGAMMA_COEF = (
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
)


def rgamma_series(z: float) -> float:
    """1/Gamma(z) from its Maclaurin series; accurate for |z| <= 1.5."""
    acc = 0.0
    for c in reversed(_RGAMMA_COEF):
        acc = acc * z + c
    return acc * z


def _temme_gammas(mu: float):
    """gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    # 1/Gamma(1+z) = sum_k c_k z^(k-1) = even(z^2) + z * odd(z^2); working with
    # the two halves keeps gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
    # free of cancellation as mu -> 0.
    m2 = mu * mu
    even = 0.0
    for c in reversed(_RGAMMA_COEF[0::2]):
        even = even * m2 + c
    odd = 0.0
    for c in reversed(_RGAMMA_COEF[1::2]):
        odd = odd * m2 + c
    return -odd, even, even + mu * odd, even - mu * odd


# ---------------------------------------------------------------------------
# Modified Bessel function of the second kind
# ---------------------------------------------------------------------------

_EPS = 1e-16
_MAXIT = 100_000
_EXP_LIMIT = 709.78


def _bessel_k_pair_scaled(mu: float, x: float):
    """e^x K_mu(x) and e^x K_{mu+1}(x) for |mu| <= 1/2 (Temme / Steed)."""
    xi = 1.0 / x
    xi2 = 2.0 * xi
    mu2 = mu * mu
    if x < 2.0:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = mu * d
        fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _temme_gammas(mu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        total1 = p
        for i in range(1, _MAXIT):
            ff = (i * ff + p + q) / (i * i - mu2)
            c *= d / i
            p /= i - mu
            q /= i + mu
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if abs(delta) < abs(total) * _EPS:
                break
        else:  # pragma: no cover - the series always converges for x < 2
            raise SeriesConvergenceError("Temme series for K_nu did not converge")
        scale = math.exp(x)
        return total * scale, total1 * xi2 * scale
    # Steed's continued fraction CF2 with the Temme normalisation.
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu2
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:  # pragma: no cover
        raise SeriesConvergenceError("continued fraction for K_nu did not converge")
    h = a1 * h
    k_mu = math.sqrt(math.pi / (2.0 * x)) / s
    return k_mu, k_mu * (mu + x + 0.5 - h) * xi


def bessel_k_scaled(nu: float, x: float) -> float:
    """Exponentially scaled K: returns e^x K_nu(x)."""
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"bessel_k requires x > 0, got {x}")
    nu = abs(float(nu))
    n_up = int(nu + 0.5)
    mu = nu - n_up
    k_mu, k_next = _bessel_k_pair_scaled(mu, x)
    xi2 = 2.0 / x
    for i in range(1, n_up + 1):
        k_mu, k_next = k_next, (mu + i) * xi2 * k_next + k_mu
    return k_mu


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x) for x > 0.

    Raises OverflowError once e^{-x} leaves the double range instead of
    silently returning zero; use ``bessel_k_scaled`` for larger arguments.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"bessel_k requires x > 0, got {x}")
    if x > _EXP_LIMIT:
        raise OverflowError(f"e^x scaling out of range for x={x}; use bessel_k_scaled")
    return bessel_k_scaled(nu, x) * math.exp(-x)


# ---------------------------------------------------------------------------
# 2F3
# ---------------------------------------------------------------------------


def _is_nonpositive_int(b: float) -> bool:
    return b <= 0.0 and b == math.floor(b)


def hyp2f3_with_magnitude(a1, a2, b1, b2, b3, z, control: SeriesControl = DEFAULT_SERIES, drop_leading: bool = False):
    """Series value of 2F3 together with the sum of absolute term values.

    The ratio magnitude/|value| is the cancellation factor callers use to
    decide whether the double-precision result is trustworthy. With
    ``drop_leading`` the k = 0 term is left out, giving 2F3 - 1 without
    the cancellation of forming it afterwards.
    """
    for b in (b1, b2, b3):
        if _is_nonpositive_int(b):
            raise PoleError(f"2F3 lower parameter {b} is a non-positive integer")
    z = float(z)
    term = 1.0
    terms = [] if drop_leading else [1.0]
    running = 0.0 if drop_leading else 1.0
    magnitude = running
    for k in range(control.max_terms):
        ratio = (a1 + k) * (a2 + k) / ((b1 + k) * (b2 + k) * (b3 + k) * (k + 1.0)) * z
        term *= ratio
        if term == 0.0:
            break
        terms.append(term)
        running += term
        magnitude += abs(term)
        # only stop once the terms are shrinking
        if abs(ratio) < 1.0 and abs(term) <= control.rel_tol * abs(running):
            break
    else:
        raise SeriesConvergenceError(
            f"2F3 series did not reach rel_tol={control.rel_tol} in {control.max_terms} terms (z={z})"
        )
    return math.fsum(terms), magnitude


def hyp2f3(a1, a2, b1, b2, b3, z, control: SeriesControl = DEFAULT_SERIES) -> float:
    """Generalized hypergeometric 2F3(a1, a2; b1, b2, b3; z) by direct summation."""
    return hyp2f3_with_magnitude(a1, a2, b1, b2, b3, z, control)[0]


# ---------------------------------------------------------------------------
# Hermite polynomials and Gaussian moments
# ---------------------------------------------------------------------------


def hermite_eval(q: int, x):
    """Probabilists' Hermite polynomial He_q evaluated at x (scalar or array)."""
    if q < 0:
        raise DomainError(f"Hermite degree must be >= 0, got {q}")
    x = np.asarray(x, dtype=float) if not np.isscalar(x) else float(x)
    h_prev = np.ones_like(x) if isinstance(x, np.ndarray) else 1.0
    if q == 0:
        return h_prev
    h = x
    for k in range(1, q):
        h_prev, h = h, x * h - k * h_prev
    return h


def abs_gaussian_moment(p: float) -> float:
    """E|Z|^p for standard normal Z."""
    if not p > 0.0:
        raise DomainError(f"abs_gaussian_moment requires p > 0, got {p}")
    return 2.0 ** (p / 2.0) * gamma_fn((p + 1.0) / 2.0) / math.sqrt(math.pi)
