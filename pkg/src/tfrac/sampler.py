"""Exact Gaussian sampling of tempered fractional noises and paths.

Default method: circulant embedding (Davies-Harte / Wood-Chan). A Toeplitz
Cholesky factor is the fallback when the embedding is not nonnegative definite.

Seeding contract: replicate r of seed s draws from a Philox stream keyed by
SeedSequence(s, spawn_key=(r,)). Results therefore do not depend on how
replicates are scheduled across threads.
"""
from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .covmodel import CovarianceModel, ProcessParams

__all__ = [
    "Method",
    "NoisePath",
    "SamplePath",
    "NoisePlan",
    "CovarianceNotPSDError",
    "plan_noise",
    "sample_noise",
    "sample_noise_batch",
    "sample_path",
    "resolve_threads",
    "RNG_ID",
]

RNG_ID = "numpy Philox4x64-10, SeedSequence(seed, spawn_key=(replicate,)), Box-Muller"
JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10)
# relative size of a negative circulant eigenvalue still treated as roundoff
EIG_TOL = 1e-12
_SEED_MAX = 2**64


class CovarianceNotPSDError(np.linalg.LinAlgError):
    pass


class Method(str, enum.Enum):
    CIRCULANT = "Circulant"
    CHOLESKY = "Cholesky"


@dataclass(frozen=True)
class NoisePath:
    params: ProcessParams
    n: int
    values: np.ndarray
    seed: int
    method: Method
    replicate: int = 0


@dataclass(frozen=True)
class SamplePath:
    params: ProcessParams
    delta: float
    values: np.ndarray
    seed: int
    method: Method
    replicate: int = 0

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @property
    def grid(self) -> np.ndarray:
        return self.delta * np.arange(len(self.values))


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def standard_normals(seed: int, replicate: int, size: int) -> np.ndarray:
    """Box-Muller normals from the counter-based stream of (seed, replicate)."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=(int(replicate),))
    gen = np.random.Generator(np.random.Philox(ss))
    half = (size + 1) // 2
    u = gen.random((2, half))
    rad = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u in (0, 1]
    ang = 2.0 * np.pi * u[1]
    return np.concatenate((rad * np.cos(ang), rad * np.sin(ang)))[:size]


@dataclass
class NoisePlan:
    """Reusable factorization for drawing many noise vectors of one length."""

    model: CovarianceModel
    n: int
    method: Method
    sqrt_eig: np.ndarray | None = field(default=None, repr=False)
    chol: np.ndarray | None = field(default=None, repr=False)
    jitter: float = 0.0
    min_eig_ratio: float = 0.0

    def draw(self, seed: int, replicate: int = 0) -> np.ndarray:
        if self.method is Method.CIRCULANT:
            m2 = len(self.sqrt_eig)
            z = standard_normals(seed, replicate, 2 * m2)
            w = self.sqrt_eig * (z[:m2] + 1j * z[m2:])
            return np.fft.fft(w)[: self.n].real
        z = standard_normals(seed, replicate, self.n)
        return self.chol @ z


def plan_noise(model: CovarianceModel, n: int, method: Method | str | None = None) -> NoisePlan:
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    method = Method(method) if method is not None else None
    if method in (None, Method.CIRCULANT):
        m = 1 << max(1, (2 * n - 1).bit_length())  # next power of two >= 2n
        g = model.autocov_array(m + 1)
        row = np.concatenate((g, g[-2:0:-1]))  # length 2m, symmetric
        eig = np.fft.rfft(row).real
        eig = np.concatenate((eig, eig[-2:0:-1]))
        top = eig.max()
        ratio = eig.min() / top
        if ratio >= -EIG_TOL or method is Method.CIRCULANT:
            if ratio < -EIG_TOL:
                raise CovarianceNotPSDError(f"circulant embedding has eigenvalue ratio {ratio:.3e}")
            sqrt_eig = np.sqrt(np.clip(eig, 0.0, None) / len(eig))
            return NoisePlan(model, n, Method.CIRCULANT, sqrt_eig=sqrt_eig, min_eig_ratio=ratio)
    g = model.autocov_array(n)
    cov_mat = linalg.toeplitz(g)
    for eps in JITTER_LADDER:
        try:
            chol = np.linalg.cholesky(cov_mat + eps * g[0] * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        return NoisePlan(model, n, Method.CHOLESKY, chol=chol, jitter=eps)
    raise CovarianceNotPSDError(f"Toeplitz covariance not PSD even with jitter {JITTER_LADDER[-1]}")


def sample_noise(model: CovarianceModel, n: int, seed: int, replicate: int = 0, method=None) -> NoisePath:
    plan = plan_noise(model, n, method)
    vals = plan.draw(seed, replicate)
    return NoisePath(model.params, plan.n, vals, _check_seed(seed), plan.method, int(replicate))


def resolve_threads(threads=None) -> int:
    """Explicit argument wins; otherwise TFRAC_THREADS; otherwise the CPU count."""
    if threads in (None, "auto"):
        env = os.environ.get("TFRAC_THREADS")
        if env and env != "auto":
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def map_replicates(fn, replicates: int, threads=None, chunk: int = 64):
    """[fn(r) for r in range(replicates)], evaluated on a thread pool, in order."""
    threads = resolve_threads(threads)
    if threads == 1 or replicates <= 1:
        return [fn(r) for r in range(replicates)]

    def run(lo):
        return [fn(r) for r in range(lo, min(lo + chunk, replicates))]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        blocks = list(pool.map(run, range(0, replicates, chunk)))
    return [x for b in blocks for x in b]


def sample_noise_batch(model: CovarianceModel, n: int, seed: int, replicates: int, threads=None, method=None) -> np.ndarray:
    """(replicates, n) array; row r equals sample_noise(model, n, seed, r).values."""
    plan = plan_noise(model, n, method)
    _check_seed(seed)
    rows = map_replicates(lambda r: plan.draw(seed, r), int(replicates), threads)
    return np.vstack(rows) if rows else np.empty((0, plan.n))


def sample_path(model: CovarianceModel, n: int, delta: float, seed: int, replicate: int = 0, method=None) -> SamplePath:
    """Path on {0, delta, ..., n delta} via X(i delta) = delta^H X'(i), X' with lambda*delta."""
    delta = float(delta)
    if not delta > 0.0:
        raise ValueError("delta must be > 0")
    unit = model if delta == 1.0 else CovarianceModel.shared(model.params.rescaled(delta))
    noise = sample_noise(unit, n, seed, replicate, method)
    vals = np.empty(noise.n + 1)
    vals[0] = 0.0
    np.cumsum(noise.values, out=vals[1:])
    vals *= delta**model.params.hurst
    return SamplePath(model.params, delta, vals, noise.seed, noise.method, noise.replicate)
