"""Monte-Carlo statistics: Hermite variations, cumulants, p-variation, KS, rates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse, special
from scipy import stats as sps

from .covmodel import (
    CovarianceModel,
    DegenerateVarianceError,
    exact_asymptotic_profile,
    finite_n_variance,
)
from .hermite import HermiteSpec
from .sampler import NoisePath, SamplePath, map_replicates, plan_noise

__all__ = [
    "HermiteSpec",
    "CumulantEstimate",
    "TooFewSamplesError",
    "hermite_variation",
    "normalized_statistic",
    "exact_variance",
    "variation_replicates",
    "sample_cumulants",
    "p_variation",
    "ks_distance",
    "ks_critical_value",
    "rate_regression",
    "RateFit",
    "edgeworth_check",
    "EdgeworthReport",
    "derive_seed",
    "quadratic_variation_cumulants",
    "empirical_autocov",
    "autocov_replicates",
]


class TooFewSamplesError(ValueError):
    pass


def derive_seed(seed: int, *tags: int) -> int:
    """Independent 64-bit seed for a sub-experiment (e.g. one n of a grid)."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


# ---------------------------------------------------------------------------
# Hermite variations
# ---------------------------------------------------------------------------


def _variation(values: np.ndarray, c1: float, f: HermiteSpec) -> float:
    # np.sum is pairwise, so the result does not depend on thread layout
    return float(np.sum(f(values / c1))) / math.sqrt(len(values))


def hermite_variation(noise: NoisePath, model: CovarianceModel, f: HermiteSpec) -> float:
    """V_n = n^{-1/2} sum_k f(X_k / C_1)."""
    if noise.params != model.params:
        raise ValueError("noise was generated under different parameters")
    if len(noise.values) != noise.n:
        raise ValueError(f"noise length {len(noise.values)} does not match n={noise.n}")
    return _variation(np.asarray(noise.values), math.sqrt(model.c1_squared), f)


def exact_variance(model: CovarianceModel, f: HermiteSpec, n: int) -> float:
    s2 = finite_n_variance(model, f, n)
    if s2 <= 1e-14:
        raise DegenerateVarianceError(f"Var(V_n) = {s2:.3e} is degenerate at n={n}")
    return s2


def normalized_statistic(v_n: float, model: CovarianceModel, f: HermiteSpec, n: int) -> float:
    """F_n = V_n / sqrt(Var V_n) with the exact finite-n variance."""
    return v_n / math.sqrt(exact_variance(model, f, n))


def variation_replicates(model: CovarianceModel, f: HermiteSpec, n: int, seed: int, replicates: int, threads=None) -> np.ndarray:
    """V_n for replicates 0..M-1 of the given seed, one noise path each."""
    plan = plan_noise(model, n)
    c1 = math.sqrt(model.c1_squared)
    return np.array(map_replicates(lambda r: _variation(plan.draw(seed, r), c1, f), int(replicates), threads))


# ---------------------------------------------------------------------------
# cumulants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CumulantEstimate:
    n: int
    replicates: int
    k2: float
    k3: float
    k4: float
    se2: float
    se3: float
    se4: float

    def to_dict(self):
        return asdict(self)


def _kstats(s1, s2, s3, s4, m):
    """k-statistics from power sums of m (centered) observations. Broadcasts."""
    mean = s1 / m
    c2 = s2 / m - mean**2
    c3 = s3 / m - 3 * mean * s2 / m + 2 * mean**3
    c4 = s4 / m - 4 * mean * s3 / m + 6 * mean**2 * s2 / m - 3 * mean**4
    k2 = m / (m - 1) * c2
    k3 = m * m / ((m - 1) * (m - 2)) * c3
    k4 = m * m * ((m + 1) * c4 - 3 * (m - 1) * c2**2) / ((m - 1) * (m - 2) * (m - 3))
    return k2, k3, k4


def sample_cumulants(samples: Sequence[float], n: int = 0) -> CumulantEstimate:
    """Unbiased k2, k3, k4 with delete-one jackknife standard errors."""
    x = np.asarray(samples, dtype=float)
    m = len(x)
    if m < 30:
        raise TooFewSamplesError(f"need >= 30 samples, got {m}")
    x = x - x.mean()
    if not np.any(x):
        raise DegenerateVarianceError("constant sample: k2 = 0 and higher k-statistics are undefined")
    p = [x**j for j in (1, 2, 3, 4)]
    tot = [math.fsum(v) for v in p]
    k2, k3, k4 = _kstats(*tot, m)
    loo = _kstats(*(t - v for t, v in zip(tot, p)), m - 1)
    se = [math.sqrt((m - 1) / m * float(np.sum((v - v.mean()) ** 2))) for v in loo]
    return CumulantEstimate(int(n), m, float(k2), float(k3), float(k4), *se)


def quadratic_variation_cumulants(model: CovarianceModel, n: int):
    """Exact (k3, k4) of F_n for f = H_2.

    sum_k H_2(Y_k) = Y'Y - n with Y ~ N(0, R), so its p-th cumulant is
    2^{p-1} (p-1)! tr(R^p). R is banded to the numerical support of gamma,
    which keeps the traces O(n K^2).
    """
    n = int(n)
    kmax = min(n - 1, model.support(1e-18, 1))
    rho = np.array([model.autocov(k) for k in range(kmax + 1)]) / model.c1_squared
    offsets = list(range(-kmax, kmax + 1))
    r = sparse.diags([np.full(n - abs(o), rho[abs(o)]) for o in offsets], offsets, format="csr")
    r2 = r @ r
    tr3 = float(r2.multiply(r).sum())
    tr4 = float(r2.multiply(r2).sum())
    var = 2.0 * float(r.multiply(r).sum())
    return 8.0 * tr3 / var**1.5, 48.0 * tr4 / var**2


def empirical_autocov(x: np.ndarray, max_lag: int) -> np.ndarray:
    """(1/(n-k)) sum_i x_i x_{i+k} for k = 0..max_lag, mean known to be zero."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}]")
    m = 1 << (2 * n - 1).bit_length()
    fx = np.fft.rfft(x, m)
    acf = np.fft.irfft(fx * fx.conj(), m)[: max_lag + 1]
    return acf / (n - np.arange(max_lag + 1))


def autocov_replicates(model: CovarianceModel, n: int, max_lag: int, seed: int, replicates: int, threads=None) -> np.ndarray:
    """(replicates, max_lag+1) empirical autocovariances of sampled noise."""
    plan = plan_noise(model, n)
    rows = map_replicates(lambda r: empirical_autocov(plan.draw(seed, r), max_lag), int(replicates), threads)
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# p-variation, KS, regression
# ---------------------------------------------------------------------------


def p_variation(path: SamplePath | np.ndarray, beta: float, stride: int = 1) -> float:
    """sum_i |X(t_{i+1}) - X(t_i)|^beta over the grid, optionally thinned by stride."""
    vals = np.asarray(path.values if isinstance(path, SamplePath) else path, dtype=float)
    d = np.abs(np.diff(vals[:: int(stride)]))
    return float(np.sum(d**beta))


def ks_distance(samples: Sequence[float], target: str = "StdNormal") -> float:
    """sup_x |F_m(x) - Phi(x)|."""
    if target != "StdNormal":
        raise ValueError(f"unsupported target {target!r}")
    x = np.sort(np.asarray(samples, dtype=float))
    m = len(x)
    if m < 100:
        raise TooFewSamplesError(f"need >= 100 samples, got {m}")
    cdf = special.ndtr(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def ks_critical_value(m: int, level: float) -> float:
    """Critical KS distance for sample size m at significance `level` (exact law)."""
    return float(sps.kstwo.ppf(1.0 - level, m))


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float = 0.0
    excluded: int = 0

    def __iter__(self):
        return iter((self.slope, self.stderr))


def rate_regression(points: Sequence[tuple[float, float]], excluded: int = 0) -> RateFit:
    """OLS slope of log(value) on log(n) with its standard error."""
    pts = [(float(n), float(v)) for n, v in points]
    if len({n for n, _ in pts}) < 4:
        raise ValueError("need at least 4 distinct n")
    if any(v <= 0.0 or n <= 0.0 for n, v in pts):
        raise ValueError("rate_regression needs positive n and values; pass |k3| and drop zeros")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    res = sps.linregress(x, y)
    return RateFit(float(res.slope), float(res.stderr), float(res.intercept), int(excluded))


# ---------------------------------------------------------------------------
# Edgeworth
# ---------------------------------------------------------------------------


@dataclass
class EdgeworthReport:
    q: int
    rho: float
    replicates: int
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.records if r["decisive"])


def edgeworth_check(model: CovarianceModel, q: int, z_grid, n_grid, replicates: int, seed: int = 0xC0FFEE, threads=None, nsigma: float = 3.0) -> EdgeworthReport:
    """Compare sqrt(n) (P(F_n <= z) - Phi(z)) with the first Edgeworth term.

    Only the largest n is decisive; smaller n are reported for the trend.
    """
    f = HermiteSpec.single(int(q))
    rho, _ = exact_asymptotic_profile(model, q, 0.0)
    rep = EdgeworthReport(int(q), rho, int(replicates))
    n_grid = sorted(int(n) for n in n_grid)
    for idx, n in enumerate(n_grid):
        sd = math.sqrt(exact_variance(model, f, n))
        fn = variation_replicates(model, f, n, derive_seed(seed, idx), replicates, threads) / sd
        for z in z_grid:
            p_hat = float(np.mean(fn <= z))
            phi = float(special.ndtr(z))
            est = math.sqrt(n) * (p_hat - phi)
            # binomial error of p_hat, evaluated at the model probability
            se = math.sqrt(n * phi * (1.0 - phi) / replicates)
            target = exact_asymptotic_profile(model, q, z)[1]
            rep.records.append(
                {
                    "n": n,
                    "z": float(z),
                    "estimate": est,
                    "target": target,
                    "stderr": se,
                    "tolerance": nsigma * se,
                    "decisive": n == n_grid[-1],
                    "pass": abs(est - target) <= nsigma * se,
                }
            )
    return rep
