"""One-step transition laws and trajectory likelihood.

Given the current size z, the next size is a compound sum: draw the
progenitor count from the control law at z, then add that many i.i.d.
offspring. Three interchangeable methods produce this law:

* ``ExactConvolution`` mixes exact convolution powers of the offspring
  pmf over the control pmf's effective window;
* ``PgfInversion`` recovers each atom from the compound generating
  function evaluated on a shrinking circle (the radius is tuned so the
  aliasing error is about 10**-gamma);
* ``DiscretisedNormalApprox`` rounds a normal with the matched
  conditional mean and variance to the integers.

Method choice is automatic when not forced: exact convolution whenever
the projected support is small enough, generating-function inversion
otherwise. The same transition laws drive the trajectory
log-likelihood and a multistart Nelder-Mead maximum-likelihood fit.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from ._rng import substream
from .dn import DiscretisedNormal
from .errors import (AllZero, ImpossibleTransition, NumericalInstability,
                     SupportOverflow)
from .model import (CbpModel, ControlSpec, FiniteSupport, Poisson,
                    solve_p_from_moments)
from .pmf import Pmf, convolve, convolve_power
from .simulate import Trajectory

_FIT_SCHEMA = "cbp-fit/v1"

AUTO_EXACT_MAX_SUPPORT = 1 << 16
_WINDOW_EPS = 5e-13
_LIKELIHOOD_FLOOR = 1e-300


@dataclass(frozen=True)
class ExactConvolution:
    """Exact mixture of offspring convolution powers."""

    support_cap: int = 1 << 24

    def __post_init__(self):
        if self.support_cap < 2:
            raise ValueError("support_cap must be >= 2")


@dataclass(frozen=True)
class PgfInversion:
    """Atom recovery from the compound generating function.

    ``gamma`` sets the inversion circle radius 10**(-gamma/(2k)); the
    aliasing error per atom is about 10**-gamma.
    """

    gamma: float = 9.0

    def __post_init__(self):
        if not 6.0 <= self.gamma <= 14.0:
            raise ValueError("gamma must lie in [6, 14]")


@dataclass(frozen=True)
class DiscretisedNormalApprox:
    """Integer-rounded normal with matched conditional mean/variance."""


TransitionMethod = Union[ExactConvolution, PgfInversion,
                         DiscretisedNormalApprox]


def conditional_moments(model: CbpModel, z: int) -> tuple:
    """Mean and variance of the next size given current size z.

    mean = m * eps(z); var = m^2 * nu2(z) + sigma^2 * eps(z).
    """
    ms = model.offspring.moments()
    eps = model.control.eps(int(z))
    nu2 = model.control.nu2(int(z))
    mean = ms.mean * eps
    var = ms.mean**2 * nu2 + ms.var * eps
    return float(mean), float(var)


def projected_support_len(model: CbpModel, z: int) -> int:
    """Length of the exact transition support window at size z."""
    phi = model.control.pmf(int(z))
    xi = model.offspring.pmf()
    hi = (phi.offset + phi.probs.size - 1) * (xi.offset + xi.probs.size - 1)
    lo = phi.offset * xi.offset
    return hi - lo + 1


def choose_method(model: CbpModel, z: int) -> TransitionMethod:
    """Exact convolution when the window is small, inversion otherwise."""
    if projected_support_len(model, z) <= AUTO_EXACT_MAX_SUPPORT:
        return ExactConvolution()
    return PgfInversion()


@lru_cache(maxsize=4096)
def _inversion_nodes(k: int, gamma: float) -> tuple:
    """Circle points and sign weights for the atom-k inversion sum."""
    r = 10.0 ** (-gamma / (2.0 * k))
    j = np.arange(1, k)
    points = np.concatenate(([r, -r], r * np.exp(1j * np.pi * j / k)))
    signs = np.concatenate(([1.0, float((-1) ** k)], 2.0 * (-1.0) ** j))
    points.setflags(write=False)
    signs.setflags(write=False)
    return r, points, signs


def invert_pgf(pgf, k: int, gamma: float = 9.0) -> float:
    """P(X = k) for a non-negative integer X from its generating function.

    Evaluates the inversion sum on the circle of radius 10**(-gamma/(2k));
    the callable must accept complex numpy arrays.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return float(np.real(pgf(0.0)))
    r, points, signs = _inversion_nodes(int(k), float(gamma))
    total = float(signs @ np.real(pgf(points)))
    return total / (2.0 * k * r**k)


def _compound_pgf(model: CbpModel, z: int):
    def G(s):
        return model.control.pgf(int(z), model.offspring.pgf(s))

    return G


def compound_pmf(count: Pmf, summand: Pmf,
                 support_cap: int = 1 << 24) -> Pmf:
    """Law of a sum of ``count`` i.i.d. draws from ``summand``.

    The mixture runs over the count pmf's effective window (up to 5e-13
    of count mass trimmed per side); the summand convolution powers step
    incrementally through the window. All omitted mass ends up in the
    certified tail.
    """
    if count.offset < 0:
        raise ValueError("count must be supported on the non-negative "
                         "integers")
    probs = count.probs
    if probs.size == 1:
        u_lo = u_hi = count.offset
    else:
        cum = np.cumsum(probs)
        drop_lo = int(np.searchsorted(cum, _WINDOW_EPS))
        rcum = np.cumsum(probs[::-1])
        drop_hi = int(np.searchsorted(rcum, _WINDOW_EPS))
        if drop_lo + drop_hi >= probs.size:
            keep = int(np.argmax(probs))
            drop_lo, drop_hi = keep, probs.size - 1 - keep
        u_lo = count.offset + drop_lo
        u_hi = count.offset + probs.size - 1 - drop_hi
    top = summand.offset + summand.probs.size - 1
    out_offset = u_lo * summand.offset
    out_len = u_hi * top - out_offset + 1
    if out_len > support_cap:
        raise SupportOverflow(
            f"compound window of {out_len} atoms exceeds the cap of "
            f"{support_cap}")
    out = np.zeros(max(out_len, 1))
    part = convolve_power(summand, u_lo, support_cap=support_cap)
    for u in range(u_lo, u_hi + 1):
        w = count.prob(u)
        if w > 0.0:
            pos = part.offset - out_offset
            out[pos:pos + part.probs.size] += w * part.probs
        if u < u_hi:
            part = convolve(part, summand)
    tail = max(0.0, 1.0 - float(out.sum()))
    return Pmf.from_probs(out, out_offset, tail)


def _exact_transition(model: CbpModel, z: int,
                      method: ExactConvolution) -> Pmf:
    return compound_pmf(model.control.pmf(int(z)), model.offspring.pmf(),
                        support_cap=method.support_cap)


def _inversion_transition(model: CbpModel, z: int,
                          method: PgfInversion) -> Pmf:
    mean, var = conditional_moments(model, z)
    k_max = int(math.ceil(mean + 12.0 * math.sqrt(max(var, 0.0)))) + 5
    G = _compound_pgf(model, z)
    probs = np.empty(k_max + 1)
    neg_tol = 10.0 ** (-method.gamma)
    for k in range(k_max + 1):
        p = invert_pgf(G, k, method.gamma)
        if p < -neg_tol:
            raise NumericalInstability(
                f"inversion produced {p:.3e} at atom {k}; the aliasing "
                f"target 10**-{method.gamma:g} cannot be met")
        probs[k] = min(max(p, 0.0), 1.0)
    total = float(probs.sum())
    if total > 1.0:
        # Aliasing error of about 10**-gamma per atom can push the sum
        # past one; anything beyond that budget is a real failure.
        if total - 1.0 > neg_tol * (k_max + 1):
            raise NumericalInstability(
                f"inverted atoms sum to {total!r}, exceeding the aliasing "
                f"budget for gamma={method.gamma:g}")
        probs /= total
        tail = 0.0
    else:
        tail = 1.0 - total
    return Pmf.from_probs(probs, 0, tail)


def _dn_transition(model: CbpModel, z: int) -> Pmf:
    mean, var = conditional_moments(model, z)
    if var <= 0.0:
        return Pmf.point_mass(int(round(mean)))
    return DiscretisedNormal(mean, var).materialize()


def transition_pmf(model: CbpModel, z: int,
                   method: Optional[TransitionMethod] = None) -> Pmf:
    """Law of the next population size given current size z."""
    z = int(z)
    if z < 0:
        raise ValueError("z must be >= 0")
    if z == 0:
        return Pmf.point_mass(0)
    if method is None:
        method = choose_method(model, z)
    if isinstance(method, ExactConvolution):
        return _exact_transition(model, z, method)
    if isinstance(method, PgfInversion):
        return _inversion_transition(model, z, method)
    if isinstance(method, DiscretisedNormalApprox):
        return _dn_transition(model, z)
    raise TypeError(f"unknown transition method {method!r}")


def log_likelihood(traj: Trajectory, model: CbpModel,
                   method: Optional[TransitionMethod] = None) -> float:
    """Sum of log transition probabilities along the observed sizes.

    Transitions out of size zero are certain self-loops; any 0 -> y > 0
    step is impossible under every family and raises. Probabilities that
    are zero in the stored window but covered by certified tail mass are
    floored at 1e-300 and counted in a warning rather than treated as
    impossible.

    With ``PgfInversion`` each transition probability is one inversion at
    the observed atom, skipping the full vector; inversion cannot certify
    an exact zero, so atoms at or below the aliasing tolerance are floored
    instead of raising.
    """
    by_atom = isinstance(method, PgfInversion)
    cache: dict = {}
    total = 0.0
    n_floored = 0
    sizes = traj.sizes
    for k in range(1, sizes.size):
        z_prev, z_next = int(sizes[k - 1]), int(sizes[k])
        if z_prev == 0:
            if z_next != 0:
                raise ImpossibleTransition(
                    f"transition 0 -> {z_next} at step {k} has probability "
                    f"zero under every model")
            continue
        if by_atom:
            p = cache.get((z_prev, z_next))
            if p is None:
                G = cache.get(z_prev)
                if G is None:
                    G = _compound_pgf(model, z_prev)
                    cache[z_prev] = G
                p = invert_pgf(G, z_next, method.gamma)
                cache[(z_prev, z_next)] = p
            if p <= 10.0 ** (-method.gamma):
                n_floored += 1
                p = _LIKELIHOOD_FLOOR
            else:
                p = min(p, 1.0)
        else:
            pm = cache.get(z_prev)
            if pm is None:
                pm = transition_pmf(model, z_prev, method)
                cache[z_prev] = pm
            p = pm.prob(z_next)
            if p <= 0.0:
                if pm.tail_mass == 0.0:
                    raise ImpossibleTransition(
                        f"transition {z_prev} -> {z_next} at step {k} has "
                        f"probability zero")
                n_floored += 1
                p = _LIKELIHOOD_FLOOR
        total += math.log(p)
    if n_floored:
        warnings.warn(
            f"{n_floored} transition(s) fell outside the stored window and "
            f"were floored at {_LIKELIHOOD_FLOOR:g}", RuntimeWarning,
            stacklevel=2)
    return total


# ---------------------------------------------------------------------------
# maximum likelihood


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


@dataclass(frozen=True)
class OffspringSimplexFamily:
    """Free offspring probabilities on {0..K} with the control held fixed.

    The unconstrained parameter vector holds K logits for p_1..p_K; the
    p_0 logit is pinned at zero, so the map to the simplex is one-to-one.
    """

    K: int
    control: ControlSpec
    z0: int

    name = "offspring_simplex"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @property
    def n_params(self) -> int:
        return self.K

    @property
    def param_names(self) -> list:
        return [f"p{j}" for j in range(self.K + 1)]

    def build(self, theta: np.ndarray) -> CbpModel:
        logits = np.concatenate(([0.0], np.clip(theta, -400.0, 400.0)))
        return CbpModel(FiniteSupport(tuple(_softmax(logits))),
                        self.control, self.z0)

    def natural(self, theta: np.ndarray) -> dict:
        logits = np.concatenate(([0.0], np.clip(theta, -400.0, 400.0)))
        p = _softmax(logits)
        return {f"p{j}": float(p[j]) for j in range(self.K + 1)}

    def start_points(self, seed: int, n_starts: int) -> list:
        pts = [np.zeros(self.K)]
        for i in range(1, n_starts):
            pts.append(substream(seed, 101, i).normal(0.0, 1.0, self.K))
        return pts

    def build_natural(self, params: dict) -> CbpModel:
        p = tuple(float(params[f"p{j}"]) for j in range(self.K + 1))
        return CbpModel(FiniteSupport(p), self.control, self.z0)

    def theta_from_natural(self, params: dict) -> np.ndarray:
        p = np.array([max(float(params[f"p{j}"]), 1e-9)
                      for j in range(self.K + 1)])
        p = p / p.sum()
        return np.log(p[1:] / p[0])

    def natural_from_moments(self, m: float, sigma2: float) -> dict:
        pm = solve_p_from_moments(m, max(sigma2, 0.0), self.K)
        probs = np.zeros(self.K + 1)
        probs[pm.offset:pm.offset + pm.probs.size] = pm.probs
        return {f"p{j}": float(probs[j]) for j in range(self.K + 1)}

    def moments_from_natural(self, params: dict) -> tuple:
        p = np.array([float(params[f"p{j}"]) for j in range(self.K + 1)])
        ks = np.arange(self.K + 1)
        m = float(ks @ p)
        return m, float((ks**2) @ p - m**2)


@dataclass(frozen=True)
class PoissonOffspringFamily:
    """Poisson offspring with log-parametrized rate, control held fixed."""

    control: ControlSpec
    z0: int

    name = "poisson_offspring"
    n_params = 1
    param_names = ["lam"]

    def build(self, theta: np.ndarray) -> CbpModel:
        return CbpModel(Poisson(math.exp(float(np.clip(theta[0], -40, 40)))),
                        self.control, self.z0)

    def natural(self, theta: np.ndarray) -> dict:
        return {"lam": math.exp(float(np.clip(theta[0], -40, 40)))}

    def start_points(self, seed: int, n_starts: int) -> list:
        pts = [np.zeros(1)]
        for i in range(1, n_starts):
            pts.append(substream(seed, 101, i).normal(0.0, 1.0, 1))
        return pts

    def build_natural(self, params: dict) -> CbpModel:
        return CbpModel(Poisson(float(params["lam"])), self.control, self.z0)

    def theta_from_natural(self, params: dict) -> np.ndarray:
        return np.array([math.log(max(float(params["lam"]), 1e-12))])

    def natural_from_moments(self, m: float, sigma2: float) -> dict:
        if m <= 0:
            raise ValueError("moment-based rate needs a positive mean")
        return {"lam": float(m)}

    def moments_from_natural(self, params: dict) -> tuple:
        lam = float(params["lam"])
        return lam, lam


@dataclass(frozen=True)
class FitResult:
    family: str
    params: dict
    loglik: float
    converged: bool
    n_evals: int


_BAD_OBJECTIVE = 1e18


def fit_mle(traj: Trajectory, family, method: Optional[TransitionMethod]
            = None, seed: int = 0, n_starts: int = 8,
            extra_starts: Sequence[np.ndarray] = ()) -> FitResult:
    """Multistart Nelder-Mead maximum likelihood over a fit family.

    The simplex tolerance on the parameters is 1e-8 with no function
    tolerance, so the simplex diameter is the binding stopping rule.
    Starts that produce impossible transitions score 1e18. Ties in the
    final objective within 1e-10 break toward the lexicographically
    smallest natural parameter vector, making the result deterministic.
    """
    if not (traj.sizes[:-1] > 0).any():
        raise AllZero("trajectory has no informative transition")
    starts = family.start_points(seed, n_starts) + [np.asarray(x, float)
                                                    for x in extra_starts]
    n_evals = 0

    def objective(theta):
        nonlocal n_evals
        n_evals += 1
        try:
            mdl = family.build(theta)
            ll = log_likelihood(traj, mdl, method)
        except (ValueError, ImpossibleTransition, SupportOverflow,
                NumericalInstability, OverflowError):
            return _BAD_OBJECTIVE
        if not math.isfinite(ll):
            return _BAD_OBJECTIVE
        return -ll

    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for x0 in starts:
            res = minimize(objective, x0, method="Nelder-Mead",
                           options={"xatol": 1e-8, "fatol": math.inf,
                                    "maxiter": 4000, "maxfev": 6000})
            key = (res.fun, tuple(family.natural(res.x).values()))
            if best is None:
                best = (key, res)
            else:
                (f_best, nat_best), _ = best
                if (res.fun < f_best - 1e-10
                        or (abs(res.fun - f_best) <= 1e-10
                            and key[1] < nat_best)):
                    best = (key, res)
    _, res = best
    if res.fun >= _BAD_OBJECTIVE:
        raise ImpossibleTransition(
            "every start produced an impossible transition; the family "
            "cannot explain the trajectory")
    return FitResult(family=family.name, params=family.natural(res.x),
                     loglik=-float(res.fun), converged=bool(res.success),
                     n_evals=n_evals)


def fit_to_json(result: FitResult, seed: Optional[int] = None) -> dict:
    return {
        "schema": _FIT_SCHEMA,
        "family": result.family,
        "params": {k: float(v) for k, v in result.params.items()},
        "loglik": result.loglik,
        "converged": result.converged,
        "n_evals": result.n_evals,
        "seed": seed,
    }


def write_fit_json(result: FitResult, path: str,
                   seed: Optional[int] = None) -> None:
    with open(path, "w") as fh:
        json.dump(fit_to_json(result, seed), fh, indent=2)
        fh.write("\n")
