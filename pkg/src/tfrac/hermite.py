from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .specfun import hermite_eval


@dataclass(frozen=True)
class HermiteSpec:
    """Finite Hermite expansion f = sum_q a_q He_q with rank d = min{q : a_q != 0}."""

    coefficients: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        coef = {int(q): float(a) for q, a in dict(self.coefficients).items() if a != 0.0}
        if not coef:
            raise ValueError("Hermite expansion needs at least one nonzero coefficient")
        if min(coef) < 1:
            raise ValueError("Hermite rank must be >= 1 (f has to be centred)")
        if not all(np.isfinite(a) for a in coef.values()):
            raise ValueError("Hermite coefficients must be finite")
        object.__setattr__(self, "coefficients", dict(sorted(coef.items())))

    @classmethod
    def single(cls, q: int, a: float = 1.0) -> "HermiteSpec":
        return cls({q: a})

    @property
    def rank(self) -> int:
        return min(self.coefficients)

    @property
    def degree(self) -> int:
        return max(self.coefficients)

    def __call__(self, x):
        out = 0.0
        for q, a in self.coefficients.items():
            out = out + a * hermite_eval(q, x)
        return out
