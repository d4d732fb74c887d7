"""Integer-rounded normal laws.

DN(mean, var) places on each integer k the normal mass of the interval
(k - 1/2, k + 1/2]. Materialization truncates at mean +- 12 standard
deviations; the discarded mass, below 4e-33, is recorded as tail mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .pmf import Pmf


@dataclass(frozen=True)
class DiscretisedNormal:
    mean: float
    var: float

    def __post_init__(self):
        if not (self.var > 0 and math.isfinite(self.var)):
            raise ValueError("var must be positive and finite")
        if not math.isfinite(self.mean):
            raise ValueError("mean must be finite")

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def prob(self, k: int) -> float:
        s = self.sd
        return float(ndtr((k + 0.5 - self.mean) / s)
                     - ndtr((k - 0.5 - self.mean) / s))

    def materialize(self, n_sd: float = 12.0) -> Pmf:
        s = self.sd
        lo = int(math.floor(self.mean - n_sd * s))
        hi = int(math.ceil(self.mean + n_sd * s))
        ks = np.arange(lo, hi + 1, dtype=np.float64)
        probs = ndtr((ks + 0.5 - self.mean) / s) - ndtr(
            (ks - 0.5 - self.mean) / s)
        tail = max(0.0, 1.0 - float(probs.sum()))
        return Pmf.from_probs(probs, lo, tail)
