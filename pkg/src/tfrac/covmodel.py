"""Second-order structure of tempered fractional Brownian motion.

Two kinds are covered. Kind I is the exponentially tempered Mandelbrot-van Ness
moving average. Kind II adds the lambda * int_0^t ds correction term to the
kernel.

Both have stationary increments, so everything follows from the variance
psi(t) = E[X(t)^2] = |t|^{2H} C_t^2. The noise autocovariance is the half second
difference of psi.

Two evaluation routes are used for psi.

Kind I. psi(t) = 2 (r(0) - r(t)) with
    r(u) = Gamma(H+1/2) / sqrt(pi) * (u / (2 lam))^H * K_H(lam u).
This is the textbook C_t^2 formula multiplied out. Its second differences give
gamma(k), k >= 1, without cancelling the large constant r(0).

Kind II. For small lam*t the 2F3 representation of C_t^2 is used directly.
Otherwise, and for all second differences at lags >= 2, we use
    psi(t) = A t - B + T(t),
    T(t) = 2 c (2 lam^2)^{1-H} lam^{-2} [x^H K_H(x) - x Q(x)],   x = lam t,
    Q(x) = int_x^inf v^{H-1} K_{H-1}(v) dv.
Here A = Gamma(H+1/2)^2 lam^{1-2H} and B = T(0) is the constant term of the 2F3
expansion. T is the part of psi that decays exponentially. It is the double
antiderivative of twice the stationary covariance
    c (u / (2 lam))^{H-1} K_{H-1}(lam u).
"""
from __future__ import annotations

import enum
import functools
import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .specfun import (
    DomainError,
    bessel_k_scaled,
    gamma_fn,
    gamma_real,
    hyp2f3_with_magnitude,
)

__all__ = [
    "Kind",
    "ProcessParams",
    "CovarianceModel",
    "TruncationError",
    "DegenerateVarianceError",
    "variance_scale",
    "variance",
    "cov",
    "noise_autocov",
    "noise_autocov_asymptote",
    "psi_second_derivative",
    "fbm_variance_constant",
    "bm_limit_variance",
    "finite_n_variance",
    "spectral_density",
    "exact_asymptotic_profile",
]

SQRT_PI = math.sqrt(math.pi)
# lam*t above which the kind II 2F3 route is abandoned regardless of the guard
_HYP_SWITCH = 20.0
# acceptable double-precision relative error of a cancelling sum
_CANCEL_TOL = 1e-11
TRUNC_EPS = 1e-16
MAX_LAG = 1_000_000


class TruncationError(RuntimeError):
    pass


class DegenerateVarianceError(ArithmeticError):
    pass


class Kind(str, enum.Enum):
    I = "I"
    II = "II"


@dataclass(frozen=True)
class ProcessParams:
    kind: Kind
    hurst: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        h, lam = float(self.hurst), float(self.lam)
        if not (h > 0.0 and math.isfinite(h)):
            raise ValueError(f"hurst must be > 0, got {self.hurst}")
        if not (lam > 0.0 and math.isfinite(lam)):
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        object.__setattr__(self, "hurst", h)
        object.__setattr__(self, "lam", lam)

    @property
    def alpha(self) -> float:
        return self.hurst - 0.5

    def rescaled(self, c: float) -> "ProcessParams":
        """Parameters of t -> X(c t) / c^H, i.e. lambda multiplied by c."""
        return ProcessParams(self.kind, self.hurst, self.lam * c)

    def require_unit_hurst(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"this operation needs H in (0, 1), got H={self.hurst}")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "hurst": self.hurst, "lambda": self.lam}


# ---------------------------------------------------------------------------
# kind I
# ---------------------------------------------------------------------------


def _xpow_k(nu_pow: float, nu: float, x: float) -> float:
    """x^p K_nu(x) without overflow or premature underflow."""
    return math.exp(nu_pow * math.log(x) - x) * bessel_k_scaled(nu, x)


def _r_kind1(p: ProcessParams, u: float) -> float:
    h, lam = p.hurst, p.lam
    if u == 0.0:
        return gamma_fn(2 * h) / (2 * lam) ** (2 * h)
    x = lam * abs(u)
    return gamma_fn(h + 0.5) / (SQRT_PI * (2 * lam * lam) ** h) * _xpow_k(h, h, x)


def _psi_kind1(p: ProcessParams, t: float) -> float:
    if t == 0.0:
        return 0.0
    if p.hurst == 0.5:
        # exact: (1 - e^{-lam t}) / lam
        return -math.expm1(-p.lam * t) / p.lam
    return 2.0 * (_r_kind1(p, 0.0) - _r_kind1(p, t))


# ---------------------------------------------------------------------------
# kind II
# ---------------------------------------------------------------------------


def _kind2_consts(p: ProcessParams):
    h, lam = p.hurst, p.lam
    a = gamma_fn(h + 0.5) ** 2 * lam ** (1 - 2 * h)
    b = 2 * (h - 0.5) * gamma_fn(h + 0.5) * gamma_fn(h) * lam ** (-2 * h) / SQRT_PI
    # coefficient of [x^H K_H(x) - x Q(x)] in T; carries 1/Gamma(H - 1/2)
    pref = 2.0 * gamma_fn(h + 0.5) ** 2 * 2 ** (1 - h) * lam ** (-2 * h) / (SQRT_PI * gamma_real(h - 0.5))
    return a, b, pref


def _q_tail(h: float, x: float) -> float:
    """Q(x) = int_x^inf v^{H-1} K_{H-1}(v) dv for x > 0."""
    nu = h - 1.0

    def f(w):
        v = x + w
        # e^{-w} weight is carried by the scaled Bessel; e^{-x} restored below
        return math.exp(nu * math.log(v) - w) * bessel_k_scaled(nu, v)

    edges = (0.0, 1.0, 8.0, 40.0, np.inf)
    pieces = [
        integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    ]
    return math.exp(-x) * math.fsum(pieces)


def _t_kind2(p: ProcessParams, t: float, consts=None) -> float:
    """Exponentially decaying part T(t) of the kind II variance."""
    h, lam = p.hurst, p.lam
    _, b, pref = consts or _kind2_consts(p)
    if t == 0.0:
        return b
    x = lam * abs(t)
    if x > 745.0:
        return 0.0
    return pref * (_xpow_k(h, h, x) - x * _q_tail(h, x))


def _psi_kind2_hyp(p: ProcessParams, t: float):
    """2F3 form of psi with an estimate of its relative rounding error."""
    h, lam = p.hurst, p.lam
    x = lam * t
    z = 0.25 * x * x
    if z == 0.0:
        return 0.0, 0.0
    g1, m1 = hyp2f3_with_magnitude(1.0, -0.5, 1.0 - h, 0.5, 1.0, z, drop_leading=True)  # 2F3 - 1
    f2, m2 = hyp2f3_with_magnitude(1.0, h - 0.5, 1.0, h + 1.0, h + 0.5, z)
    # psi = t^{2H} C_t^2; fold t^{2H} into each term
    c1 = (1 - 2 * h) * gamma_fn(h + 0.5) * gamma_fn(h) * lam ** (-2 * h) / SQRT_PI
    c2 = gamma_real(1 - h) * gamma_fn(h + 0.5) / (SQRT_PI * h * 2 ** (2 * h)) * t ** (2 * h)
    val = c2 * f2 - c1 * g1
    mag = abs(c1) * m1 + abs(c2) * m2
    err = mag * 2.2e-16 * 8 / abs(val) if val != 0.0 else math.inf
    return val, err


def _psi_kind2(p: ProcessParams, t: float, consts=None) -> float:
    if t == 0.0:
        return 0.0
    h = p.hurst
    if h == 0.5:
        return t
    x = p.lam * t
    if x <= _HYP_SWITCH and h != math.floor(h):
        val, err = _psi_kind2_hyp(p, t)
        if err <= _CANCEL_TOL:
            return val
    a, b, _ = consts or _kind2_consts(p)
    return a * t - b + _t_kind2(p, t, consts)


# ---------------------------------------------------------------------------
# public closed forms
# ---------------------------------------------------------------------------


def _psi(p: ProcessParams, t: float) -> float:
    t = abs(float(t))
    return _psi_kind1(p, t) if p.kind is Kind.I else _psi_kind2(p, t)


def variance_scale(params: ProcessParams, t: float) -> float:
    """C_t^2 = E[X(t)^2] / |t|^{2H}."""
    t = float(t)
    if t == 0.0:
        raise DomainError("variance_scale is undefined at t = 0")
    return _psi(params, t) / abs(t) ** (2 * params.hurst)


def variance(params: ProcessParams, t: float) -> float:
    return _psi(params, t)


def cov(params: ProcessParams, s: float, t: float) -> float:
    s, t = float(s), float(t)
    if s == t:
        return _psi(params, t)
    return 0.5 * (_psi(params, t) + _psi(params, s) - _psi(params, t - s))


def _gamma_lag(p: ProcessParams, k: int, consts=None, t_cache=None) -> float:
    k = abs(int(k))
    if p.kind is Kind.I:
        if k == 0:
            return _psi_kind1(p, 1.0)
        if p.hurst == 0.5:
            lam = p.lam
            # -(cosh lam - 1) e^{-lam k} / lam, written to stay accurate for small lam
            return -2.0 * math.sinh(0.5 * lam) ** 2 * math.exp(-lam * k) / lam
        r = [_r_kind1(p, float(j)) for j in (k - 1, k, k + 1)]
        return -(r[2] - 2.0 * r[1] + r[0])
    if p.hurst == 0.5:
        return 1.0 if k == 0 else 0.0
    if k == 0:
        return _psi_kind2(p, 1.0, consts)
    if k == 1:
        return 0.5 * (_psi_kind2(p, 2.0, consts) - 2.0 * _psi_kind2(p, 1.0, consts))

    def tv(j):
        if t_cache is None:
            return _t_kind2(p, float(j), consts)
        if j not in t_cache:
            t_cache[j] = _t_kind2(p, float(j), consts)
        return t_cache[j]

    return 0.5 * (tv(k + 1) - 2.0 * tv(k) + tv(k - 1))


@dataclass
class CovarianceModel:
    """Covariance surface for fixed parameters with a memoized noise autocovariance."""

    params: ProcessParams
    c1_squared: float = field(init=False)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._autocov: dict[int, float] = {}
        self._t_cache: dict[int, float] = {}
        self._consts = _kind2_consts(self.params) if self.params.kind is Kind.II and self.params.hurst != 0.5 else None
        self.clamp_count = 0
        self.c1_squared = self.autocov(0)
        if not self.c1_squared > 0.0:
            raise DegenerateVarianceError(f"C_1^2 = {self.c1_squared} is not positive")

    @classmethod
    def of(cls, kind, hurst, lam) -> "CovarianceModel":
        return cls(ProcessParams(kind, hurst, lam))

    @staticmethod
    @functools.lru_cache(maxsize=64)
    def shared(params: ProcessParams) -> "CovarianceModel":
        """Process-wide model per parameter set, so memo tables are reused."""
        return CovarianceModel(params)

    def autocov(self, k: int) -> float:
        k = abs(int(k))
        val = self._autocov.get(k)
        if val is not None:
            return val
        with self._lock:
            val = self._autocov.get(k)
            if val is None:
                val = _gamma_lag(self.params, k, self._consts, self._t_cache)
                self._autocov[k] = val
        return val

    def autocov_array(self, n: int) -> np.ndarray:
        """gamma(0), ..., gamma(n-1); lags past the numerical support are set to 0."""
        out = np.zeros(int(n))
        cut = self.support(eps=1e-18)
        for k in range(min(int(n), cut + 1)):
            out[k] = self.autocov(k)
        return out

    def support(self, eps: float = TRUNC_EPS, power: int = 1) -> int:
        """Smallest K past which |gamma(k)/C_1^2|^power < eps for all larger lags.

        Relies on the exponential decay of gamma. Two consecutive lags below
        the threshold, both past the transient region k ~ 1/lambda, end the scan.
        """
        c1 = self.c1_squared
        k_min = int(math.ceil(3.0 / self.params.lam)) + 2
        below = 0
        k = 1
        while k <= MAX_LAG:
            if abs(self.autocov(k) / c1) ** power < eps:
                below += 1
                if below >= 2 and k >= k_min:
                    return k - 2
            else:
                below = 0
            k += 1
        raise TruncationError(f"autocovariance not below {eps} within {MAX_LAG} lags")

    # convenience wrappers
    def variance(self, t):
        return variance(self.params, t)

    def cov(self, s, t):
        return cov(self.params, s, t)

    def variance_scale(self, t):
        return variance_scale(self.params, t)


def noise_autocov(model: CovarianceModel, k: int) -> float:
    """gamma(k) = (psi(|k|+1) - 2 psi(|k|) + psi(|k|-1)) / 2."""
    return model.autocov(k)


def noise_autocov_asymptote(params: ProcessParams, j: int) -> float:
    """Leading-order behaviour of gamma(j) for large j.

    Kind I: -2 Gamma(a+1) (cosh lam - 1) (2 lam)^{-a-1} e^{-lam j} j^a.
    Kind II: (4 a / lam) Gamma(a+1) (cosh lam - 1) (2 lam)^{-a-1} e^{-lam j} j^{a-1},
    with a = H - 1/2. Kind II is positive for H > 1/2 and identically zero at H = 1/2.
    """
    j = int(j)
    if j < 1:
        raise ValueError("asymptote is defined for j >= 1")
    a, lam = params.alpha, params.lam
    # (cosh lam - 1) = 2 sinh^2(lam / 2)
    base = gamma_fn(a + 1) * 2.0 * math.sinh(0.5 * lam) ** 2 * math.exp(-(a + 1) * math.log(2 * lam) - lam * j)
    if params.kind is Kind.I:
        return -2.0 * base * j**a
    return 4.0 * a / lam * base * j ** (a - 1)


def fbm_variance_constant(hurst: float) -> float:
    """C(H)^2 = Var of the untempered Mandelbrot-van Ness integral at t = 1.

    Equals Gamma(H+1/2)^2 / (Gamma(2H+1) sin(pi H)) for 0 < H < 1. Both kinds
    reduce to this integral as lambda -> 0, and it governs their 1/H-variation.
    """
    h = float(hurst)
    if not 0.0 < h < 1.0:
        raise DomainError("fbm_variance_constant needs 0 < H < 1")
    return gamma_fn(h + 0.5) ** 2 / (gamma_fn(2 * h + 1) * math.sin(math.pi * h))


def psi_second_derivative(params: ProcessParams, t: float) -> float:
    """psi''(t) for kind I, t > 0, through K_{H-1} and K_{H-2}."""
    if params.kind is not Kind.I:
        raise ValueError("psi_second_derivative is implemented for kind I only")
    t = float(t)
    if not t > 0.0:
        raise DomainError("psi_second_derivative needs t > 0")
    h, lam = params.hurst, params.lam
    x = lam * t
    c = 2.0 * gamma_fn(h + 0.5) * lam * lam / (SQRT_PI * (2 * lam * lam) ** h)
    return c * (_xpow_k(h - 1, h - 1, x) - _xpow_k(h, h - 2, x))


def _rho_array(model: CovarianceModel, power: int) -> np.ndarray:
    kmax = model.support(TRUNC_EPS, power)
    return np.array([model.autocov(k) for k in range(kmax + 1)]) / model.c1_squared


def bm_limit_variance(model: CovarianceModel, hermite) -> float:
    """sigma^2 = sum_q q! a_q^2 sum_{k in Z} rho(k)^q with rho = gamma / C_1^2."""
    rho = _rho_array(model, hermite.rank)
    total = []
    for q, a in hermite.coefficients.items():
        rq = rho**q
        total.append(math.factorial(q) * a * a * (rq[0] + 2.0 * math.fsum(rq[1:])))
    return max(math.fsum(total), 0.0)


def finite_n_variance(model: CovarianceModel, hermite, n: int) -> float:
    """Exact Var(V_n) = sum_q q! a_q^2 sum_{|k|<n} (1 - |k|/n) rho(k)^q."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    kmax = min(n - 1, model.support(1e-18, 1))
    rho = np.array([model.autocov(k) for k in range(kmax + 1)]) / model.c1_squared
    w = 1.0 - np.arange(kmax + 1) / n
    total = []
    for q, a in hermite.coefficients.items():
        rq = w * rho**q
        total.append(math.factorial(q) * a * a * (rq[0] + 2.0 * math.fsum(rq[1:])))
    return math.fsum(total)


def spectral_density(model: CovarianceModel, omega: float) -> float:
    """h(omega) = (2 pi)^{-1} sum_k gamma(k) cos(k omega), clamped at zero."""
    omega = float(omega)
    if abs(omega) > math.pi + 1e-12:
        raise ValueError("omega must lie in [-pi, pi]")
    kmax = model.support(TRUNC_EPS, 1)
    g = np.array([model.autocov(k) for k in range(kmax + 1)])
    terms = g[1:] * np.cos(np.arange(1, kmax + 1) * omega)
    h = (g[0] + 2.0 * math.fsum(terms)) / (2.0 * math.pi)
    if h < 0.0:
        with model._lock:
            model.clamp_count += 1
        if h < -1e-12 * g[0]:
            warnings.warn(f"spectral density {h:.3e} < 0 at omega={omega}; clamped", RuntimeWarning)
        h = 0.0
    return h


def exact_asymptotic_profile(model: CovarianceModel, q: int, z: float):
    """(rho, profile(z)) for the n^{-1/2} correction of P(F_n <= z) - Phi(z).

    F_n is the normalized q-th Hermite variation. Its third cumulant behaves
    like 2 rho / sqrt(n). The first Edgeworth term is therefore
        rho / (3 sqrt(2 pi)) * (1 - z^2) * exp(-z^2 / 2).
    """
    q = int(q)
    if q < 1:
        raise ValueError("q must be >= 1")
    if q % 2 == 1:
        return 0.0, 0.0
    from .hermite import HermiteSpec

    sigma2 = bm_limit_variance(model, HermiteSpec.single(q))
    if sigma2 <= 1e-14:
        raise DegenerateVarianceError(f"limit variance {sigma2:.3e} vanishes; no Edgeworth term")
    half = q // 2
    kmax = model.support(TRUNC_EPS, half)
    g = np.array([model.autocov(k) for k in range(2 * kmax + 1)]) / model.c1_squared
    lags = np.arange(-kmax, kmax + 1)
    gh = g[np.abs(lags)] ** half
    cross = g[np.abs(lags[None, :] - lags[:, None])] ** half
    s = float(gh @ cross @ gh)
    const = q * math.factorial(q) * math.factorial(half) * math.comb(q - 1, half - 1) ** 2
    rho = const * s / sigma2**1.5
    z = float(z)
    profile = rho / (3.0 * math.sqrt(2.0 * math.pi)) * (1.0 - z * z) * math.exp(-0.5 * z * z)
    return rho, profile
