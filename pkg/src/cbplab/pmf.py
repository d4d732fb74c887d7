"""Finite lattice probability vectors with certified tail mass.

A :class:`Pmf` stores probabilities of consecutive integers starting at
``offset``. Mass that a construction provably pushed outside the stored
window is carried in ``tail_mass``, so downstream arithmetic can report a
certified error bound instead of silently dropping probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import SupportOverflow, TailTooHeavy

_TOTAL_TOL = 1e-12


def _as_prob_array(probs) -> np.ndarray:
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("probs must be a non-empty 1-d vector")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("probs must be finite and non-negative")
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probabilities of the integers ``offset, offset+1, ...``.

    Invariants: all stored probabilities are non-negative, the first and
    last stored entries are positive (unless the vector has length one),
    and ``sum(probs) + tail_mass`` is 1 within 1e-12.
    """

    offset: int
    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        arr = _as_prob_array(self.probs)
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)
        object.__setattr__(self, "offset", int(self.offset))
        if self.tail_mass < 0 or not math.isfinite(self.tail_mass):
            raise ValueError("tail_mass must be finite and >= 0")
        total = float(arr.sum()) + self.tail_mass
        if abs(total - 1.0) > _TOTAL_TOL:
            raise ValueError(f"total mass {total!r} is not 1 within {_TOTAL_TOL}")
        if arr.size > 1 and (arr[0] == 0.0 or arr[-1] == 0.0):
            raise ValueError("stored support must not have zero ends; trim first")

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return (self.offset == other.offset
                and self.tail_mass == other.tail_mass
                and np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash((self.offset, self.tail_mass, self.probs.tobytes()))

    @staticmethod
    def from_probs(probs, offset: int = 0, tail_mass: float = 0.0) -> "Pmf":
        """Build a Pmf, trimming exact-zero ends into the offset."""
        arr = _as_prob_array(probs)
        nz = np.flatnonzero(arr)
        if nz.size == 0:
            raise ValueError("probs must carry some mass")
        lo, hi = int(nz[0]), int(nz[-1])
        return Pmf(offset + lo, arr[lo : hi + 1], tail_mass)

    @staticmethod
    def point_mass(k: int) -> "Pmf":
        return Pmf(int(k), np.ones(1))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.probs.size)

    @property
    def stored_mass(self) -> float:
        return float(self.probs.sum())

    def prob(self, k: int) -> float:
        """P(X = k) for the stored window; 0.0 outside it."""
        i = int(k) - self.offset
        if 0 <= i < self.probs.size:
            return float(self.probs[i])
        return 0.0

    def pgf(self, s):
        """sum_k p_k s^k over the stored support.

        Accepts scalars or arrays, real or complex; the polynomial part is
        evaluated by Horner's scheme."""
        s_arr = np.asarray(s)
        val = npoly.polyval(s_arr, self.probs)
        if self.offset:
            val = val * s_arr**self.offset
        return val[()] if getattr(val, "ndim", 0) == 0 else val


@dataclass(frozen=True)
class MomentSummary:
    """Mean and central moments through order four, plus the lattice step."""

    mean: float
    var: float
    third_central: float
    third_abs_central: float
    fourth_central: float
    lattice: int = 1

    def __post_init__(self):
        if self.var < 0 or self.third_abs_central < 0 or self.fourth_central < 0:
            raise ValueError("even/absolute central moments must be >= 0")
        if self.lattice < 1:
            raise ValueError("lattice must be a positive integer")


def pmf_moments(pmf: Pmf, tail_tol: float = 1e-10) -> MomentSummary:
    """Moments by direct summation over the stored support.

    Raises TailTooHeavy when the certified tail mass exceeds ``tail_tol``;
    beyond that the truncation error in the higher moments is not
    negligible at the package's default tolerances.
    """
    if pmf.tail_mass > tail_tol:
        raise TailTooHeavy(
            f"tail mass {pmf.tail_mass:.3e} exceeds tolerance {tail_tol:.3e}")
    ks = pmf.support.astype(np.float64)
    p = pmf.probs
    mean = float(p @ ks)
    d = ks - mean
    var = float(p @ d**2)
    third = float(p @ d**3)
    third_abs = float(p @ np.abs(d) ** 3)
    fourth = float(p @ d**4)
    pos = pmf.support[pmf.probs > 0]
    if pos.size <= 1:
        lattice = 1
    else:
        lattice = int(np.gcd.reduce(np.diff(pos)))
    return MomentSummary(mean, max(var, 0.0), third, third_abs,
                         max(fourth, 0.0), lattice)


def convolve(p: Pmf, q: Pmf) -> Pmf:
    """Law of the sum of independent variables with laws p and q.

    The stored vectors are convolved exactly (direct convolution, float64);
    tail masses compose as 1 - (1-t_p)(1-t_q) <= t_p + t_q.
    """
    probs = np.convolve(p.probs, q.probs)
    stored = float(probs.sum())
    tail = max(0.0, 1.0 - stored)
    return Pmf.from_probs(probs, p.offset + q.offset, tail)


def convolve_power(pmf: Pmf, n: int, support_cap: int = 1 << 24) -> Pmf:
    """Exact n-fold self-convolution by binary powering.

    n = 0 is the empty sum (point mass at zero). Raises SupportOverflow if
    the resulting support could not fit in ``support_cap`` points.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return Pmf.point_mass(0)
    projected = (pmf.probs.size - 1) * n + 1
    if projected > support_cap:
        raise SupportOverflow(
            f"support would need {projected} points (cap {support_cap})")
    result = None
    base = pmf
    k = n
    while True:
        if k & 1:
            result = base if result is None else convolve(result, base)
        k >>= 1
        if k == 0:
            break
        base = convolve(base, base)
    return result
