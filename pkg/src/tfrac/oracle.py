"""Brute-force covariances from the moving-average kernels.

Slow on purpose. Nothing here touches the Bessel or 2F3 code, so agreement with
``covmodel`` is a genuine cross-check. All integrals use adaptive
Gauss-Kronrod (QUADPACK via scipy). They are split at every point where a
kernel has a (.)^{H-1/2} singularity or a kink.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .covmodel import Kind, ProcessParams

__all__ = [
    "QuadratureControl",
    "QuadratureError",
    "kernel",
    "noise_kernel",
    "cov_quadrature",
    "noise_autocov_quadrature",
    "lemma_a1_integral",
]


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureControl:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-10
    max_subdivisions: int = 500
    # integrals over (-inf, .) are cut at tail_factor / lambda below the origin
    tail_factor: float = 40.0

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol"):
            v = getattr(self, name)
            if not 0.0 < v <= 1e-4:
                raise ValueError(f"{name} must lie in (0, 1e-4], got {v}")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")
        if not math.exp(-2.0 * self.tail_factor) < self.abs_tol:
            raise ValueError("tail_factor too small for abs_tol: exp(-2 tail_factor) must be < abs_tol")

    def tail_cut(self, lam: float, right: float) -> float:
        return right + self.tail_factor / lam


DEFAULT_QUAD = QuadratureControl()


def _tempered_power(u, a, lam):
    """u_+^a e^{-lam u_+} with 0^0 = 0."""
    return u**a * math.exp(-lam * u) if u > 0.0 else 0.0


def _inner_ds(p: ProcessParams, lo: float, hi: float, x: float) -> float:
    """lam * int_lo^hi (s-x)_+^a e^{-lam (s-x)_+} ds through the incomplete gamma."""
    a = p.alpha + 1.0  # > 1/2
    lam = p.lam
    u_lo, u_hi = max(lo - x, 0.0), max(hi - x, 0.0)
    if u_hi <= u_lo:
        return 0.0
    # Q(a, lam u_lo) - Q(a, lam u_hi) keeps full relative accuracy in the tails
    diff = special.gammaincc(a, lam * u_lo) - special.gammaincc(a, lam * u_hi)
    return lam ** (1.0 - a) * special.gamma(a) * diff


def kernel(params: ProcessParams, t: float, x: float) -> float:
    """g_t(x) for the chosen kind, with 0^0 = 0."""
    a, lam = params.alpha, params.lam
    val = _tempered_power(t - x, a, lam) - _tempered_power(-x, a, lam)
    if params.kind is Kind.II and t != 0.0:
        lo, hi = (0.0, t) if t > 0 else (t, 0.0)
        inner = _inner_ds(params, lo, hi, x)
        val += inner if t > 0 else -inner
    return val


def noise_kernel(params: ProcessParams, k: int, x: float) -> float:
    """g_{k+1}(x) - g_k(x), the moving-average kernel of the k-th noise value."""
    a, lam = params.alpha, params.lam
    val = _tempered_power(k + 1 - x, a, lam) - _tempered_power(k - x, a, lam)
    if params.kind is Kind.II:
        val += _inner_ds(params, float(k), float(k + 1), x)
    return val


def _quad_pieces(f, edges, ctl: QuadratureControl):
    vals, errs = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, e = integrate.quad(f, lo, hi, epsabs=ctl.abs_tol, epsrel=ctl.rel_tol, limit=ctl.max_subdivisions)
        vals.append(v)
        errs.append(e)
    val = math.fsum(vals)
    err = math.fsum(errs)
    # QUADPACK is conservative; only fail when the estimate is clearly out of range
    if not math.isfinite(val) or err > 1e3 * max(ctl.abs_tol, ctl.rel_tol * abs(val)):
        raise QuadratureError(f"quadrature did not converge: value={val:.6g}, error estimate={err:.3g}")
    return val, err


def _edges(params: ProcessParams, ctl: QuadratureControl, marks, right: float):
    lam = params.lam
    left = -ctl.tail_factor / lam
    inner = sorted({m for m in marks if left < m < right})
    # extra break a few decay lengths out keeps the smooth tail panel short
    mid = -min(1.0, 1.0 / lam)
    pts = sorted({left, mid, *inner, right})
    return [p for p in pts if left <= p <= right]


def cov_quadrature(params: ProcessParams, s: float, t: float, control: QuadratureControl = DEFAULT_QUAD):
    """(value, error estimate) of int g_s(x) g_t(x) dx."""
    s, t = float(s), float(t)
    if s < 0.0 or t < 0.0:
        raise ValueError("cov_quadrature expects s, t >= 0")
    if s == 0.0 or t == 0.0:
        return 0.0, 0.0
    right = max(s, t)
    edges = _edges(params, control, (0.0, s, t), right)
    return _quad_pieces(lambda x: kernel(params, s, x) * kernel(params, t, x), edges, control)


def noise_autocov_quadrature(params: ProcessParams, k: int, control: QuadratureControl = DEFAULT_QUAD):
    """(value, error estimate) of int n_k(x) n_0(x) dx with n_j = g_{j+1} - g_j."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be >= 0")
    edges = _edges(params, control, (0.0, 1.0, float(k)), 1.0)
    return _quad_pieces(lambda x: noise_kernel(params, k, x) * noise_kernel(params, 0, x), edges, control)


def lemma_a1_integral(hurst: float, lam: float, control: QuadratureControl = DEFAULT_QUAD):
    """(value, error estimate) of int_0^inf (int_x^inf s^{H-3/2} e^{-lam s} ds)^2 dx."""
    h, lam = float(hurst), float(lam)
    if not (h > 0.0 and lam > 0.0):
        raise ValueError("need H > 0 and lambda > 0")
    a = h - 1.5

    def inner(x):
        # split at 1/lam so the algebraic part near x and the exponential tail
        # are integrated separately
        cut = max(x, 1.0 / lam)
        v1 = integrate.quad(lambda s: s**a * math.exp(-lam * s), x, cut, epsabs=0.0, epsrel=1e-12, limit=200)[0] if cut > x else 0.0
        v2 = integrate.quad(lambda s: s**a * math.exp(-lam * s), cut, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        return v1 + v2

    edges = [0.0, 1.0 / lam, 10.0 / lam, control.tail_factor / lam]
    return _quad_pieces(lambda x: inner(x) ** 2 if x > 0.0 else 0.0, edges, control)
