"""Parametric offspring and control families, their moments, and model checks.

An offspring spec is the per-progenitor reproduction law; a control spec
maps the current population size z to the random progenitor count used for
the next generation. A CbpModel bundles one of each with an initial size.
Families expose exact pmfs (with certified tail mass), closed-form moments,
probability generating functions, and samplers driven by a numpy Generator.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import stats

from .errors import OutsideSimplex, SchemaError, Unidentifiable
from .pmf import MomentSummary, Pmf, convolve_power, pmf_moments

PMF_TAIL_EPS = 1e-14

_SCHEMA = "cbp-model/v1"


def _certified_window(probs: np.ndarray, offset: int = 0) -> Pmf:
    """Pmf from a computed window of closed-form values.

    Long windows accumulate float drift; an overshoot of the total within
    1e-9 is rescaled away, a deficit becomes certified tail mass."""
    total = float(probs.sum())
    if total > 1.0:
        if total - 1.0 > 1e-9:
            raise ValueError(f"window mass {total!r} is not float drift")
        return Pmf.from_probs(probs / total, offset, 0.0)
    return Pmf.from_probs(probs, offset, 1.0 - total)


def _poisson_pmf(lam: float, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
    if lam < 0:
        raise ValueError("rate must be >= 0")
    if lam == 0:
        return Pmf.point_mass(0)
    hi = int(stats.poisson.ppf(1.0 - tail_eps / 4.0, lam)) + 4
    probs = stats.poisson.pmf(np.arange(hi + 1), lam)
    return _certified_window(probs)


def _sample_sum_chunked(draw, u: int, chunk: int = 1 << 20) -> int:
    """Sum of u i.i.d. draws; ``draw(size)`` returns an integer array."""
    total = 0
    left = int(u)
    while left > 0:
        k = min(left, chunk)
        total += int(draw(k).sum())
        left -= k
    return total


# ---------------------------------------------------------------------------
# offspring families


class OffspringSpec:
    """Interface shared by offspring families."""

    family: ClassVar[str]

    def pmf(self, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
        raise NotImplementedError

    def moments(self) -> MomentSummary:
        """Mean and central moments through order four.

        Closed forms where the family has standard ones; the third absolute
        central moment is always computed by summation over the
        materialized pmf.
        """
        return pmf_moments(self.pmf())

    def pgf(self, s):
        raise NotImplementedError

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample_sum(self, gen: np.random.Generator, u: int) -> int:
        """Sum of u i.i.d. offspring draws.

        Families whose i.i.d. sums stay in the family (Poisson, Binomial,
        Geometric, Deterministic) override this with the exact closed-form
        law; the default sums direct draws in chunks.
        """
        if u <= 0:
            return 0
        return _sample_sum_chunked(lambda k: self.sample(gen, k), u)

    def params(self) -> dict:
        raise NotImplementedError

    def _rho(self) -> float:
        return pmf_moments(self.pmf()).third_abs_central


@dataclass(frozen=True)
class FiniteSupport(OffspringSpec):
    """Offspring on {0, ..., K} with explicit probabilities p_0..p_K."""

    probs: tuple

    family: ClassVar[str] = "finite_support"

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.probs) == 0:
            raise ValueError("probs must be non-empty")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be >= 0")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    def pmf(self, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
        arr = np.array(self.probs, dtype=np.float64)
        arr = arr / arr.sum()
        return Pmf.from_probs(arr, 0, 0.0)

    def moments(self) -> MomentSummary:
        return pmf_moments(self.pmf())

    def pgf(self, s):
        # Hot path under generating-function inversion: evaluate the
        # polynomial straight off the stored tuple, no Pmf round trip.
        coeffs = self.__dict__.get("_coeffs")
        if coeffs is None:
            coeffs = np.array(self.probs, dtype=np.float64)
            coeffs /= coeffs.sum()
            coeffs.setflags(write=False)
            object.__setattr__(self, "_coeffs", coeffs)
        s_arr = np.asarray(s)
        val = npoly.polyval(s_arr, coeffs)
        return val[()] if getattr(val, "ndim", 0) == 0 else val

    def sample(self, gen, size):
        pm = self.pmf()
        cum = np.cumsum(pm.probs)
        return pm.offset + np.searchsorted(cum, gen.random(size), side="right")

    def params(self) -> dict:
        return {"probs": list(self.probs)}


@dataclass(frozen=True)
class Poisson(OffspringSpec):
    lam: float

    family: ClassVar[str] = "poisson"

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be positive and finite")

    def pmf(self, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
        return _poisson_pmf(self.lam, tail_eps)

    def moments(self) -> MomentSummary:
        lam = self.lam
        return MomentSummary(lam, lam, lam, self._rho(), lam + 3 * lam**2, 1)

    def pgf(self, s):
        return np.exp(self.lam * (s - 1.0))

    def sample(self, gen, size):
        return gen.poisson(self.lam, size)

    def sample_sum(self, gen, u):
        if u <= 0:
            return 0
        return int(gen.poisson(self.lam * u))

    def params(self) -> dict:
        return {"lam": self.lam}


@dataclass(frozen=True)
class Binomial(OffspringSpec):
    n: int
    p: float

    family: ClassVar[str] = "binomial"

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")

    def pmf(self, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
        probs = stats.binom.pmf(np.arange(self.n + 1), self.n, self.p)
        return Pmf.from_probs(probs, 0, 0.0)

    def moments(self) -> MomentSummary:
        n, p = self.n, self.p
        q = 1.0 - p
        var = n * p * q
        third = n * p * q * (1.0 - 2.0 * p)
        fourth = n * p * q * (1.0 + 3.0 * (n - 2) * p * q)
        return MomentSummary(n * p, var, third, self._rho(), fourth, 1)

    def pgf(self, s):
        return (1.0 - self.p + self.p * s) ** self.n

    def sample(self, gen, size):
        return gen.binomial(self.n, self.p, size)

    def sample_sum(self, gen, u):
        if u <= 0:
            return 0
        return int(gen.binomial(self.n * int(u), self.p))

    def params(self) -> dict:
        return {"n": self.n, "p": self.p}


@dataclass(frozen=True)
class Geometric(OffspringSpec):
    """Geometric offspring; support starts at 0 (default) or at 1.

    With ``start_at_zero`` the law is P(k) = (1-p)^k p on {0, 1, ...};
    otherwise P(k) = (1-p)^(k-1) p on {1, 2, ...}. Both conventions appear
    in the literature, hence the flag.
    """

    p: float
    start_at_zero: bool = True

    family: ClassVar[str] = "geometric"

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")

    def pmf(self, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
        q = 1.0 - self.p
        hi = int(math.ceil(math.log(tail_eps) / math.log(q))) + 2
        ks = np.arange(hi + 1)
        probs = self.p * q**ks
        offset = 0 if self.start_at_zero else 1
        return _certified_window(probs, offset)

    def moments(self) -> MomentSummary:
        p = self.p
        q = 1.0 - p
        mean = q / p + (0.0 if self.start_at_zero else 1.0)
        var = q / p**2
        third = q * (2.0 - p) / p**3
        fourth = q * (9.0 * q + p**2) / p**4
        return MomentSummary(mean, var, third, self._rho(), fourth, 1)

    def pgf(self, s):
        q = 1.0 - self.p
        base = self.p / (1.0 - q * s)
        return base if self.start_at_zero else s * base

    def sample(self, gen, size):
        # numpy's geometric counts trials to first success (support {1,2,...})
        draws = gen.geometric(self.p, size)
        return draws - 1 if self.start_at_zero else draws

    def sample_sum(self, gen, u):
        if u <= 0:
            return 0
        # sum of u zero-based geometrics is negative binomial
        total = int(gen.negative_binomial(int(u), self.p))
        return total if self.start_at_zero else total + int(u)

    def params(self) -> dict:
        return {"p": self.p, "start_at_zero": self.start_at_zero}


@dataclass(frozen=True)
class Deterministic(OffspringSpec):
    k: int

    family: ClassVar[str] = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k))
        if self.k < 0:
            raise ValueError("k must be >= 0")

    def pmf(self, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
        return Pmf.point_mass(self.k)

    def moments(self) -> MomentSummary:
        return MomentSummary(float(self.k), 0.0, 0.0, 0.0, 0.0, 1)

    def pgf(self, s):
        return s**self.k

    def sample(self, gen, size):
        return np.full(size, self.k, dtype=np.int64)

    def sample_sum(self, gen, u):
        return self.k * max(int(u), 0)

    def params(self) -> dict:
        return {"k": self.k}


# ---------------------------------------------------------------------------
# control families


class ControlSpec:
    """Interface shared by control families.

    ``eps``, ``nu2``, ``iota`` and ``kappa4`` are the mean, variance, third
    and fourth central moments of the progenitor count at population size z,
    all in closed form. Linearly divisible families additionally expose the
    per-individual increment law chi (the control equals an i.i.d. sum of
    l(z) = z increments).
    """

    family: ClassVar[str]
    linearly_divisible: ClassVar[bool] = False

    def eps(self, z: int) -> float:
        raise NotImplementedError

    def nu2(self, z: int) -> float:
        raise NotImplementedError

    def iota(self, z: int) -> float:
        raise NotImplementedError

    def kappa4(self, z: int) -> float:
        raise NotImplementedError

    def pmf(self, z: int, tail_eps: float = PMF_TAIL_EPS) -> Pmf:
        raise NotImplementedError

    def pgf(self, z: int, s):
        raise NotImplementedError

    def sample(self, gen: np.random.Generator, z: int) -> int:
        raise NotImplementedError

    def l(self, z: int) -> int:
        """Number of i.i.d. increments for linearly divisible families."""
        return int(z)

    def increment_pmf(self, z: int) -> Pmf:
        raise ValueError(f"{self.family} control is not linearly divisible")

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class DeterministicControl(ControlSpec):
    """Identity control: every individual is a progenitor."""

    family: ClassVar[str] = "deterministic"
    linearly_divisible: ClassVar[bool] = True

    def eps(self, z):
        return float(z)

    def nu2(self, z):
        return 0.0

    def iota(self, z):
        return 0.0

    def kappa4(self, z):
        return 0.0

    def pmf(self, z, tail_eps=PMF_TAIL_EPS):
        return Pmf.point_mass(int(z))

    def pgf(self, z, s):
        n = int(z)
        s_arr = np.asarray(s)
        if s_arr.ndim == 0 or not np.iscomplexobj(s_arr):
            return s ** n
        # Hot path under generating-function inversion: polar integer
        # power needs fewer transcendental passes than complex pow.
        rho = np.abs(s_arr)
        theta = n * np.arctan2(s_arr.imag, s_arr.real)
        mag = np.exp(n * np.log(np.maximum(rho, 1e-300)))
        return mag * np.cos(theta) + 1j * (mag * np.sin(theta))

    def sample(self, gen, z):
        return int(z)

    def increment_pmf(self, z):
        return Pmf.point_mass(1)

    def params(self):
        return {}


@dataclass(frozen=True)
class ScaledDeterministic(ControlSpec):
    """phi(z) = floor(alpha * z)."""

    alpha: float

    family: ClassVar[str] = "scaled_deterministic"

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be positive and finite")

    @property
    def linearly_divisible(self):  # type: ignore[override]
        return float(self.alpha).is_integer()

    def _value(self, z):
        return int(math.floor(self.alpha * int(z)))

    def eps(self, z):
        return float(self._value(z))

    def nu2(self, z):
        return 0.0

    def iota(self, z):
        return 0.0

    def kappa4(self, z):
        return 0.0

    def pmf(self, z, tail_eps=PMF_TAIL_EPS):
        return Pmf.point_mass(self._value(z))

    def pgf(self, z, s):
        return s ** self._value(z)

    def sample(self, gen, z):
        return self._value(z)

    def increment_pmf(self, z):
        if not self.linearly_divisible:
            raise ValueError("scaled_deterministic control with non-integer "
                             "alpha is not linearly divisible")
        return Pmf.point_mass(int(self.alpha))

    def params(self):
        return {"alpha": self.alpha}


class _PoissonRateControl(ControlSpec):
    """Shared implementation for controls with phi(z) ~ Poisson(rate(z))."""

    linearly_divisible: ClassVar[bool] = True

    def rate(self, z: int) -> float:
        raise NotImplementedError

    def eps(self, z):
        return self.rate(z)

    def nu2(self, z):
        return self.rate(z)

    def iota(self, z):
        return self.rate(z)

    def kappa4(self, z):
        lam = self.rate(z)
        return lam + 3.0 * lam**2

    def pmf(self, z, tail_eps=PMF_TAIL_EPS):
        return _poisson_pmf(self.rate(z), tail_eps)

    def pgf(self, z, s):
        return np.exp(self.rate(z) * (s - 1.0))

    def sample(self, gen, z):
        lam = self.rate(z)
        return int(gen.poisson(lam)) if lam > 0 else 0

    def increment_pmf(self, z):
        return _poisson_pmf(self.rate(z) / max(int(z), 1))


@dataclass(frozen=True)
class PoissonLinear(_PoissonRateControl):
    """phi(z) ~ Poisson(alpha * z)."""

    alpha: float

    family: ClassVar[str] = "poisson_linear"

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be positive and finite")

    def rate(self, z):
        return self.alpha * int(z)

    def params(self):
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class PoissonDrift(_PoissonRateControl):
    """phi(z) ~ Poisson(z + a * z^q); the drift term a*z^q is sublinear."""

    a: float
    q: float

    family: ClassVar[str] = "poisson_drift"

    def __post_init__(self):
        if self.a < 0 or not math.isfinite(self.a):
            raise ValueError("a must be >= 0 and finite")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")

    def rate(self, z):
        z = int(z)
        return float(z) + self.a * float(z) ** self.q

    def params(self):
        return {"a": self.a, "q": self.q}


@dataclass(frozen=True)
class BinomialLinear(ControlSpec):
    """phi(z) ~ Binomial(c * z, p)."""

    c: int
    p: float

    family: ClassVar[str] = "binomial_linear"
    linearly_divisible: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "c", int(self.c))
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")

    def _n(self, z):
        return self.c * int(z)

    def eps(self, z):
        return self._n(z) * self.p

    def nu2(self, z):
        return self._n(z) * self.p * (1.0 - self.p)

    def iota(self, z):
        return self._n(z) * self.p * (1.0 - self.p) * (1.0 - 2.0 * self.p)

    def kappa4(self, z):
        n, pq = self._n(z), self.p * (1.0 - self.p)
        return n * pq * (1.0 + 3.0 * (n - 2) * pq)

    def pmf(self, z, tail_eps=PMF_TAIL_EPS):
        n = self._n(z)
        if n == 0:
            return Pmf.point_mass(0)
        return _certified_window(stats.binom.pmf(np.arange(n + 1), n, self.p))

    def pgf(self, z, s):
        return (1.0 - self.p + self.p * s) ** self._n(z)

    def sample(self, gen, z):
        n = self._n(z)
        return int(gen.binomial(n, self.p)) if n > 0 else 0

    def increment_pmf(self, z):
        probs = stats.binom.pmf(np.arange(self.c + 1), self.c, self.p)
        return Pmf.from_probs(probs, 0, 0.0)

    def params(self):
        return {"c": self.c, "p": self.p}


@dataclass(frozen=True)
class IidSumControl(ControlSpec):
    """phi(z) = sum of z i.i.d. increments drawn from the pmf ``chi``."""

    chi: Pmf

    family: ClassVar[str] = "iid_sum"
    linearly_divisible: ClassVar[bool] = True

    def __post_init__(self):
        if self.chi.offset < 0:
            raise ValueError("chi must be supported on the non-negative "
                             "integers")

    def _chi_moments(self):
        return pmf_moments(self.chi)

    def eps(self, z):
        return int(z) * self._chi_moments().mean

    def nu2(self, z):
        return int(z) * self._chi_moments().var

    def iota(self, z):
        return int(z) * self._chi_moments().third_central

    def kappa4(self, z):
        z = int(z)
        ms = self._chi_moments()
        return z * ms.fourth_central + 3.0 * z * (z - 1) * ms.var**2

    def pmf(self, z, tail_eps=PMF_TAIL_EPS):
        return convolve_power(self.chi, int(z))

    def pgf(self, z, s):
        return self.chi.pgf(s) ** int(z)

    def sample(self, gen, z):
        z = int(z)
        if z <= 0:
            return 0
        cum = np.cumsum(self.chi.probs)

        def draw(size):
            return self.chi.offset + np.searchsorted(
                cum, gen.random(size), side="right")

        return _sample_sum_chunked(draw, z)

    def increment_pmf(self, z):
        return self.chi

    def params(self):
        return {"chi": {"offset": self.chi.offset,
                        "probs": [float(p) for p in self.chi.probs]}}


# ---------------------------------------------------------------------------
# model bundle, growth rate, regularity


@dataclass(frozen=True)
class CbpModel:
    """Offspring law + control law + initial population size."""

    offspring: OffspringSpec
    control: ControlSpec
    z0: int

    def __post_init__(self):
        object.__setattr__(self, "z0", int(self.z0))
        if self.z0 < 1:
            raise ValueError("z0 must be >= 1")

    def to_json(self) -> dict:
        return {
            "schema": _SCHEMA,
            "offspring": {"family": self.offspring.family,
                          "params": self.offspring.params()},
            "control": {"family": self.control.family,
                        "params": self.control.params()},
            "z0": self.z0,
        }

    @property
    def model_id(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


OFFSPRING_FAMILIES = {cls.family: cls for cls in
                      (FiniteSupport, Poisson, Binomial, Geometric,
                       Deterministic)}
CONTROL_FAMILIES = {cls.family: cls for cls in
                    (DeterministicControl, ScaledDeterministic, PoissonLinear,
                     PoissonDrift, BinomialLinear, IidSumControl)}


def _build_from_descriptor(section: str, descriptor, registry):
    if not isinstance(descriptor, dict):
        raise SchemaError(section, "must be an object")
    unknown = set(descriptor) - {"family", "params"}
    if unknown:
        raise SchemaError(f"{section}.{sorted(unknown)[0]}", "unknown field")
    family = descriptor.get("family")
    if family not in registry:
        raise SchemaError(f"{section}.family",
                          f"unknown family {family!r}; expected one of "
                          f"{sorted(registry)}")
    params = descriptor.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError(f"{section}.params", "must be an object")
    cls = registry[family]
    if family == "iid_sum":
        chi = params.get("chi")
        if not isinstance(chi, dict) or "probs" not in chi:
            raise SchemaError(f"{section}.params.chi",
                              "must be an object with offset and probs")
        extra = set(params) - {"chi"}
        if extra:
            raise SchemaError(f"{section}.params.{sorted(extra)[0]}",
                              "unknown field")
        try:
            return cls(Pmf.from_probs(chi["probs"], chi.get("offset", 0)))
        except ValueError as exc:
            raise SchemaError(f"{section}.params.chi", str(exc)) from exc
    import inspect

    accepted = [p for p in inspect.signature(cls).parameters]
    extra = set(params) - set(accepted)
    if extra:
        raise SchemaError(f"{section}.params.{sorted(extra)[0]}",
                          "unknown field")
    try:
        return cls(**params)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{section}.params", str(exc)) from exc


def model_from_json(descriptor: dict) -> CbpModel:
    """Build a CbpModel from its versioned JSON descriptor."""
    if not isinstance(descriptor, dict):
        raise SchemaError("", "descriptor must be an object")
    if descriptor.get("schema") != _SCHEMA:
        raise SchemaError("schema", f"expected {_SCHEMA!r}")
    unknown = set(descriptor) - {"schema", "offspring", "control", "z0"}
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown field")
    offspring = _build_from_descriptor("offspring", descriptor.get("offspring"),
                                       OFFSPRING_FAMILIES)
    control = _build_from_descriptor("control", descriptor.get("control"),
                                     CONTROL_FAMILIES)
    z0 = descriptor.get("z0")
    if not isinstance(z0, int) or z0 < 1:
        raise SchemaError("z0", "must be a positive integer")
    return CbpModel(offspring, control, z0)


def mean_growth_rate(model: CbpModel, z: int) -> float:
    """tau(z) = eps(z) * m / z, the expected one-step growth factor."""
    if z < 1:
        raise ValueError("z must be >= 1")
    m = model.offspring.moments().mean
    return model.control.eps(z) * m / float(z)


@dataclass(frozen=True)
class RegularityReport:
    """Empirical sups of the moment-growth ratios over a z grid.

    a_hat, b_hat, c_hat bound eps(z)/z, nu2(z)/z, |iota(z)|/z; d_hat bounds
    kappa4(z)/z^2. ``tau_liminf_hat`` is the minimum growth rate over the
    top decade of the grid; the process is certified supercritical when it
    exceeds 1. ``eta_hat`` is the two-consecutive-atoms overlap of the
    increment law (0 for non-divisible controls) and ``lattice_ok`` records
    whether that overlap is positive.
    """

    a_hat: float
    b_hat: float
    c_hat: float
    d_hat: float
    tau_liminf_hat: float
    lattice_ok: bool
    eta_hat: float

    @property
    def supercritical(self) -> bool:
        return self.tau_liminf_hat > 1.0


def _geometric_grid(lo: int, hi: int, n: int = 64) -> np.ndarray:
    pts = np.unique(np.round(np.geomspace(max(lo, 1), max(hi, 1), n)))
    return pts.astype(np.int64)


def _eta_from_increment(chi: Pmf) -> float:
    """max_k min(P(chi=k), P(chi=k+1)) over the stored support."""
    p = chi.probs
    if p.size < 2:
        return 0.0
    return float(np.minimum(p[:-1], p[1:]).max())


def check_regularity(model: CbpModel, z_max: int,
                     grid_points: int = 64) -> RegularityReport:
    """Evaluate the moment-growth ratios on a geometric grid 1..z_max."""
    if z_max < model.z0:
        raise ValueError("z_max must be >= z0")
    grid = _geometric_grid(1, z_max, grid_points)
    ctrl = model.control
    a_hat = max(ctrl.eps(z) / z for z in grid)
    b_hat = max(ctrl.nu2(z) / z for z in grid)
    c_hat = max(abs(ctrl.iota(z)) / z for z in grid)
    d_hat = max(ctrl.kappa4(z) / z**2 for z in grid)
    top = grid[grid >= max(z_max / 10.0, 1.0)]
    tau_liminf = min(mean_growth_rate(model, int(z)) for z in top)
    if ctrl.linearly_divisible:
        eta_hat = min(_eta_from_increment(ctrl.increment_pmf(int(z)))
                      for z in grid)
    else:
        eta_hat = 0.0
    return RegularityReport(a_hat, b_hat, c_hat, d_hat, tau_liminf,
                            eta_hat > 0.0, eta_hat)


def solve_p_from_moments(m_hat: float, var_hat: float, K: int) -> Pmf:
    """Recover (p_0, ..., p_K) on {0..K} from a mean and a variance.

    For K=2 the linear system { p1 + 2 p2 = m, p1 + 4 p2 = var + m^2,
    p0 + p1 + p2 = 1 } has a unique solution; it is returned when it lies
    in the probability simplex (entries within 1e-9 outside are clamped to
    the boundary). K=3 is refused: four probabilities are not determined
    by two moments.
    """
    if K == 3:
        raise Unidentifiable("support {0..3} has four probabilities; a mean "
                             "and a variance do not determine them")
    if K != 2:
        raise ValueError("K must be 2 or 3")
    if m_hat <= 0 or var_hat < 0:
        raise ValueError("need m_hat > 0 and var_hat >= 0")
    p2 = (var_hat + m_hat**2 - m_hat) / 2.0
    p1 = m_hat - 2.0 * p2
    p0 = 1.0 - p1 - p2
    clamped = []
    for name, p in (("p0", p0), ("p1", p1), ("p2", p2)):
        if p < -1e-9 or p > 1.0 + 1e-9:
            raise OutsideSimplex(
                f"{name} = {p:.6g} is outside [0, 1]; the moments are not "
                f"compatible with support {{0, 1, 2}}")
        clamped.append(min(max(p, 0.0), 1.0))
    arr = np.array(clamped)
    return Pmf.from_probs(arr / arr.sum(), 0, 0.0)
