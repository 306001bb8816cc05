"""Tempered fractional Brownian motion of the first and second kind.

Closed-form covariances, a quadrature oracle, exact Gaussian sampling and
Monte-Carlo checks of the associated limit theorems.
"""
__version__ = "0.1.0"

from .covmodel import (  # noqa: E402
    CovarianceModel,
    Kind,
    ProcessParams,
    bm_limit_variance,
    cov,
    exact_asymptotic_profile,
    noise_autocov,
    noise_autocov_asymptote,
    spectral_density,
    variance,
    variance_scale,
)
from .hermite import HermiteSpec  # noqa: E402
from .sampler import sample_noise, sample_path  # noqa: E402

__all__ = [
    "__version__",
    "CovarianceModel",
    "Kind",
    "ProcessParams",
    "HermiteSpec",
    "bm_limit_variance",
    "cov",
    "exact_asymptotic_profile",
    "noise_autocov",
    "noise_autocov_asymptote",
    "spectral_density",
    "variance",
    "variance_scale",
    "sample_noise",
    "sample_path",
]
