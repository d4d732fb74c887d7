"""Total variation distances, certified decay bounds, and identifiability.

The computable pieces behind the non-estimability arguments: exact TVD
between lattice laws, the Stein-method bound for an i.i.d. sum against a
rounded normal, the rounded-normal-vs-rounded-normal bound, the chained
one-step bound for linearly divisible controls, multi-step propagation of
a one-step bound along a supercritical trajectory, and grid-based
identifiability verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import substream
from .dn import DiscretisedNormal
from .errors import DegenerateIncrement, InvalidMixing, MissingMoment
from .likelihood import compound_pmf, conditional_moments, transition_pmf
from .model import CbpModel
from .pmf import Pmf, pmf_moments

_EQ_TOL = 1e-9
_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    """An evaluated bound, optionally with the exact quantity it caps."""

    exact_tvd: Optional[float]
    bound_value: float
    bound_name: str
    inputs: dict


def tvd_exact(p: Pmf, q: Pmf) -> tuple:
    """Half the L1 distance over the union of stored supports.

    Returns (value, error_bound): mass hidden in either tail can move the
    true distance by at most half the combined tail mass.
    """
    lo = min(p.offset, q.offset)
    hi = max(p.offset + p.probs.size, q.offset + q.probs.size)
    a = np.zeros(hi - lo)
    b = np.zeros(hi - lo)
    a[p.offset - lo:p.offset - lo + p.probs.size] = p.probs
    b[q.offset - lo:q.offset - lo + q.probs.size] = q.probs
    value = 0.5 * float(np.abs(a - b).sum())
    return value, (p.tail_mass + q.tail_mass) / 2.0


def dn_pmf(dn: DiscretisedNormal, k: int) -> float:
    """Probability that the rounded normal equals the integer k."""
    return dn.prob(int(k))


def dn_tvd_bound(m1: float, v1: float, m2: float, v2: float,
                 compute_exact: bool = False) -> BoundReport:
    """TVD bound between rounded normals:
    3|v1-v2| / (2 max(v1,v2)) + |m1-m2| / (2 max(sd1,sd2))."""
    if v1 <= 0 or v2 <= 0:
        raise ValueError("variances must be positive")
    bound = (3.0 * abs(v1 - v2) / (2.0 * max(v1, v2))
             + abs(m1 - m2) / (2.0 * max(math.sqrt(v1), math.sqrt(v2))))
    exact = None
    if compute_exact:
        exact, _ = tvd_exact(DiscretisedNormal(m1, v1).materialize(),
                             DiscretisedNormal(m2, v2).materialize())
    return BoundReport(exact, float(bound), "rounded_normal_pair",
                       {"m1": m1, "v1": v1, "m2": m2, "v2": v2})


def third_abs_moment_bound(m: float, sigma2: float, gamma: float) -> float:
    """8 * (gamma + 3 m sigma^2 + m^3) bounds E|X-m|^3 for X on the
    non-negative integers."""
    return 8.0 * (gamma + 3.0 * m * sigma2 + m**3)


def lattice_smoothing_tvd(pmf: Pmf) -> float:
    """Exact TVD between X and X+1: half the total variation of the pmf
    sequence (tail mass can shift the true value by at most tail_mass)."""
    v = pmf.probs
    total = float(v[0]) + float(v[-1])
    if v.size > 1:
        total += float(np.abs(np.diff(v)).sum())
    return 0.5 * total


def stein_dn_bound(increment: Pmf, n: int) -> BoundReport:
    """TVD bound between a sum of n i.i.d. increments and the rounded
    normal with the matched mean n*m and variance n*sigma^2.

    Three terms: a smoothing term driven by the increment's own
    shift-TVD, a Berry-Esseen-type term in rho / (sqrt(n) sigma^3), and a
    lattice correction 1 / (2 sqrt(2 pi n) sigma).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ms = pmf_moments(increment)
    if ms.var <= 0.0:
        raise DegenerateIncrement("increment has zero variance; the "
                                  "rounded-normal comparison is undefined")
    sigma = math.sqrt(ms.var)
    rho = ms.third_abs_central
    shift = lattice_smoothing_tvd(increment)
    term1 = (math.sqrt(2.0 / math.pi) * (3.0 * rho / ms.var + 2.0)
             / math.sqrt(1.0 + 4.0 * (n - 1) * (1.0 - shift)))
    term2 = (5.0 + 3.0 * math.sqrt(math.pi / 8.0)) * rho / (
        math.sqrt(n) * sigma**3)
    term3 = 1.0 / (2.0 * math.sqrt(2.0 * math.pi * n) * sigma)
    return BoundReport(
        None, term1 + term2 + term3, "iid_sum_vs_rounded_normal",
        {"n": n, "mean": ms.mean, "var": ms.var, "rho": rho,
         "shift_tvd": shift, "terms": (term1, term2, term3)})


def cond_mean_var(model: CbpModel, z: int) -> tuple:
    """Conditional mean and variance of the next size at current size z."""
    return conditional_moments(model, z)


def fourth_central_next_step(model: CbpModel, z: int) -> float:
    """E[(Z_1 - m*eps(z))^4 | Z_0 = z] from offspring and control moments.

    Expansion of the centered compound sum: with D the centered control
    count and T the offspring-noise sum, the cross terms contribute
    6 sigma^2 m^2 (iota + eps*nu2) and 4 gamma m nu2, and the pure terms
    contribute m^4 kappa4_phi, eps*kappa4_xi and 3 sigma^4 (nu2 + eps^2
    - eps).
    """
    ms = model.offspring.moments()
    vals = (ms.mean, ms.var, ms.third_central, ms.fourth_central)
    if not all(math.isfinite(v) for v in vals):
        raise MissingMoment("offspring moments through order 4 must be "
                            "finite")
    m, s2, g, k4 = vals
    ctrl = model.control
    eps, nu2 = ctrl.eps(z), ctrl.nu2(z)
    iota, k4p = ctrl.iota(z), ctrl.kappa4(z)
    if not all(math.isfinite(v) for v in (eps, nu2, iota, k4p)):
        raise MissingMoment("control moments through order 4 must be "
                            "finite")
    return (m**4 * k4p
            + 6.0 * s2 * m**2 * iota
            + 6.0 * s2 * m**2 * eps * nu2
            + (4.0 * g * m + 3.0 * s2**2) * nu2
            + 3.0 * s2**2 * eps**2
            + (k4 - 3.0 * s2**2) * eps)


# ---------------------------------------------------------------------------
# one-step distances


def _increment_compound(model: CbpModel, z: int) -> Pmf:
    """Per-individual contribution: offspring sum over one control
    increment."""
    chi = model.control.increment_pmf(int(z))
    return compound_pmf(chi, model.offspring.pmf())


def _bounded_one_step(model_a: CbpModel, model_b: CbpModel,
                      z: int) -> BoundReport:
    y_a = _increment_compound(model_a, z)
    y_b = _increment_compound(model_b, z)
    ma, mb = pmf_moments(y_a), pmf_moments(y_b)
    if ma.var <= 0 or mb.var <= 0:
        raise DegenerateIncrement("per-individual contribution has zero "
                                  "variance")
    stein_a = stein_dn_bound(y_a, z)
    stein_b = stein_dn_bound(y_b, z)
    dn_pair = dn_tvd_bound(z * ma.mean, z * ma.var, z * mb.mean, z * mb.var)
    total = stein_a.bound_value + dn_pair.bound_value + stein_b.bound_value
    return BoundReport(
        None, total, "divisible_chain_bound",
        {"z": z,
         "stein_a": stein_a.bound_value, "stein_b": stein_b.bound_value,
         "dn_pair": dn_pair.bound_value,
         "mean_a": z * ma.mean, "var_a": z * ma.var,
         "mean_b": z * mb.mean, "var_b": z * mb.var})


def one_step_tvd(model_a: CbpModel, model_b: CbpModel, z: int,
                 method=None) -> BoundReport:
    """Distance between the two one-step laws at current size z.

    With ``method="bounded"`` the exact distance is replaced by the
    certified chain: each compound law is compared to its matched rounded
    normal (requires linearly divisible controls), and the two rounded
    normals to each other. Any other method is forwarded to
    ``transition_pmf``.
    """
    if z < 1:
        raise ValueError("z must be >= 1")
    if method == "bounded":
        return _bounded_one_step(model_a, model_b, int(z))
    pa = transition_pmf(model_a, int(z), method)
    pb = transition_pmf(model_b, int(z), method)
    value, err = tvd_exact(pa, pb)
    return BoundReport(value, value + err, "exact_transition_tvd",
                       {"z": z, "tail_a": pa.tail_mass,
                        "tail_b": pb.tail_mass})


@dataclass(frozen=True)
class DecayScan:
    """Per-size one-step distances plus the fitted log-log decay line."""

    z_grid: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    degenerate: bool


def decay_scan(model_a: CbpModel, model_b: CbpModel, z_grid,
               method=None) -> DecayScan:
    """One-step TVD across a grid of current sizes with a least-squares
    decay exponent in log-log coordinates.

    A scan with any non-positive distance (indistinguishable models) is
    flagged degenerate and carries NaN slope and intercept.
    """
    grid = np.asarray(list(z_grid), dtype=np.int64)
    if grid.size < 5:
        raise ValueError("z_grid needs at least 5 points")
    if (np.diff(grid) <= 0).any():
        raise ValueError("z_grid must be strictly increasing")
    values = np.array([one_step_tvd(model_a, model_b, int(z),
                                    method).exact_tvd
                       for z in grid])
    if (values <= 0.0).any() or not np.isfinite(values).all():
        return DecayScan(grid, values, float("nan"), float("nan"), True)
    slope, intercept = np.polyfit(np.log(grid.astype(float)),
                                  np.log(values), 1)
    return DecayScan(grid, values, float(slope), float(intercept), False)


# ---------------------------------------------------------------------------
# multi-step propagation


def multi_step_bound(s: float, q: float, a: float, b: float, m: float,
                     sigma2: float, t: float, alpha_mix: float,
                     k: Optional[int], z: float) -> float:
    """Propagate a one-step TVD bound s * z^-q over k generations.

    The recursion adds, per step, the one-step term at the current size,
    a Chebyshev escape term c2 / z with c2 = (a*sigma^2 + b*m^2) /
    ((1-alpha_mix)^2 t^2), and the previous bound evaluated at the grown
    size alpha_mix * t * z. Here t is a growth factor exceeded by the
    mean growth rate, a and b cap eps(z)/z and nu2(z)/z, and alpha_mix
    in (1/t, 1) splits growth between the two terms. With ``k=None`` the
    geometric-series limit over infinitely many steps is returned.
    """
    if t <= 1.0:
        raise InvalidMixing("t must exceed 1")
    if not (1.0 / t < alpha_mix < 1.0):
        raise InvalidMixing("alpha_mix must lie in (1/t, 1)")
    growth = alpha_mix * t
    if growth <= 1.0:
        raise InvalidMixing("alpha_mix * t must exceed 1")
    if min(s, q, a, b) <= 0:
        raise ValueError("s, q, a, b must be positive")
    if z <= 0:
        raise ValueError("z must be positive")
    c2 = (a * sigma2 + b * m**2) / ((1.0 - alpha_mix) ** 2 * t**2)
    if k is None:
        return (s * z**-q / (1.0 - growth**-q)
                + c2 / z / (1.0 - 1.0 / growth))
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 0.0
    zz = float(z)
    for _ in range(k - 1):
        total += s * zz**-q + c2 / zz
        zz *= growth
    return total + s * zz**-q


# ---------------------------------------------------------------------------
# identifiability


@dataclass(frozen=True)
class IdentifiabilityVerdict:
    scenario: str
    conditions_met: bool
    evidence: dict
    conclusion: str


_SCENARIOS = ("KnownControl", "UnknownControl", "ObservedProgenitors")

_DEFAULT_GRID = tuple(int(2**j) for j in range(4, 13))


def _control_signature(model: CbpModel) -> tuple:
    return (model.control.family, repr(sorted(model.control.params().items())))


def _fit_exponent(grid: np.ndarray, diffs: np.ndarray, gen,
                  n_boot: int):
    """Log-log slope of |diff| vs z with residual-bootstrap replicates.

    Returns (slope, boot_slopes) or None when fewer than 3 positive
    differences survive.
    """
    mask = diffs > _ZERO_TOL
    if mask.sum() < 3:
        return None
    x = np.log(grid[mask].astype(float))
    y = np.log(diffs[mask])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    resid = y - fitted
    boots = np.empty(n_boot)
    for i in range(n_boot):
        y_star = fitted + resid[gen.integers(0, resid.size, resid.size)]
        boots[i] = np.polyfit(x, y_star, 1)[0]
    return float(slope), boots


def _exponent_verdict(grid, d_mean, d_var, seed, n_boot):
    """Combine half-order mean and full-order variance exponents into the
    single rate r with a bootstrap standard error.

    The mean difference must decay like z^(r/2) and the variance
    difference like z^r, so r_hat = max(2*slope_mean, slope_var).
    Returns (met, evidence).
    """
    ev = {"delta_mean_sup": float(d_mean.max()),
          "delta_var_sup": float(d_var.max())}
    if d_mean.max() <= _ZERO_TOL and d_var.max() <= _ZERO_TOL:
        ev.update({"identical_moments": True, "r_hat": None, "r_se": None})
        return True, ev
    gen = substream(seed, 777)
    fit_m = _fit_exponent(grid, d_mean, gen, n_boot)
    fit_v = _fit_exponent(grid, d_var, gen, n_boot)
    ev["identical_moments"] = False
    candidates = []
    boot_parts = []
    if fit_m is not None:
        ev["slope_mean"] = fit_m[0]
        candidates.append(2.0 * fit_m[0])
        boot_parts.append(2.0 * fit_m[1])
    if fit_v is not None:
        ev["slope_var"] = fit_v[0]
        candidates.append(fit_v[0])
        boot_parts.append(fit_v[1])
    if not candidates:
        # differences positive somewhere but too sparse to fit a rate
        ev.update({"r_hat": None, "r_se": None, "sparse_differences": True})
        return False, ev
    r_hat = max(candidates)
    r_boot = np.max(np.vstack(boot_parts), axis=0)
    r_se = float(r_boot.std(ddof=1))
    ev.update({"r_hat": float(r_hat), "r_se": r_se,
               "rule": "r_hat + 2*se < 1"})
    return bool(r_hat + 2.0 * r_se < 1.0), ev


def _met_conclusion(scenario: str) -> str:
    tails = {
        "KnownControl":
            "the models share the control law and match offspring mean "
            "and variance",
        "UnknownControl":
            "conditional means differ at order at most z^(r/2) and "
            "conditional variances at order at most z^r for a rate r "
            "certified below 1",
        "ObservedProgenitors":
            "offspring mean and variance match and the control mean and "
            "variance differences decay at the certified orders",
    }
    return (f"{tails[scenario]}; no weakly consistent estimator for the "
            f"distinguishing parameter exists on the set of unbounded "
            f"growth")


_NOT_MET = ("conditions not verified; consistent estimation is not "
            "ruled out")


def identifiability_check(model_a: CbpModel, model_b: CbpModel,
                          scenario: str, z_grid=None, seed: int = 0,
                          n_boot: int = 200) -> IdentifiabilityVerdict:
    """Check the non-estimability hypotheses for a pair of models.

    KnownControl: same control law and matching offspring mean/variance.
    UnknownControl: decay-rate fit on conditional mean and variance
    differences (models must be linearly divisible and supercritical).
    ObservedProgenitors: matching offspring mean/variance plus decay-rate
    fit on the control mean and variance differences, with a positive
    two-consecutive-atoms overlap of the control increments.
    """
    if scenario not in _SCENARIOS:
        raise ValueError(f"scenario must be one of {_SCENARIOS}")
    grid = np.asarray(list(z_grid) if z_grid is not None else _DEFAULT_GRID,
                      dtype=np.int64)
    ms_a = model_a.offspring.moments()
    ms_b = model_b.offspring.moments()
    dm = abs(ms_a.mean - ms_b.mean)
    dv = abs(ms_a.var - ms_b.var)

    if scenario == "KnownControl":
        same_control = (_control_signature(model_a)
                        == _control_signature(model_b))
        met = same_control and dm <= _EQ_TOL and dv <= _EQ_TOL
        ev = {"control_equal": same_control, "delta_m": float(dm),
              "delta_sigma2": float(dv)}
        return IdentifiabilityVerdict(
            scenario, met, ev,
            _met_conclusion(scenario) if met else _NOT_MET)

    div_a = bool(model_a.control.linearly_divisible)
    div_b = bool(model_b.control.linearly_divisible)
    m_a = ms_a.mean
    m_b = ms_b.mean
    z_top = int(grid[-1])
    super_a = model_a.control.eps(z_top) * m_a / z_top > 1.0
    super_b = model_b.control.eps(z_top) * m_b / z_top > 1.0
    common = {"divisible_a": div_a, "divisible_b": div_b,
              "supercritical_a": super_a, "supercritical_b": super_b,
              "grid": [int(g) for g in grid]}

    if scenario == "UnknownControl":
        d_mean = np.empty(grid.size)
        d_var = np.empty(grid.size)
        for i, z in enumerate(grid):
            mean_a, var_a = conditional_moments(model_a, int(z))
            mean_b, var_b = conditional_moments(model_b, int(z))
            d_mean[i] = abs(mean_a - mean_b)
            d_var[i] = abs(var_a - var_b)
        met_rate, ev = _exponent_verdict(grid, d_mean, d_var, seed, n_boot)
        met = met_rate and div_a and div_b and super_a and super_b
        ev.update(common)
        return IdentifiabilityVerdict(
            scenario, met, ev,
            _met_conclusion(scenario) if met else _NOT_MET)

    # ObservedProgenitors
    d_eps = np.empty(grid.size)
    d_nu2 = np.empty(grid.size)
    for i, z in enumerate(grid):
        d_eps[i] = abs(model_a.control.eps(int(z))
                       - model_b.control.eps(int(z)))
        d_nu2[i] = abs(model_a.control.nu2(int(z))
                       - model_b.control.nu2(int(z)))
    met_rate, ev = _exponent_verdict(grid, d_eps, d_nu2, seed, n_boot)
    ev["delta_m"] = float(dm)
    ev["delta_sigma2"] = float(dv)
    eta = 0.0
    if div_a and div_b:
        from .model import _eta_from_increment
        eta = min(_eta_from_increment(model_a.control.increment_pmf(z_top)),
                  _eta_from_increment(model_b.control.increment_pmf(z_top)))
    ev["eta_hat"] = float(eta)
    ev.update(common)
    met = (met_rate and dm <= _EQ_TOL and dv <= _EQ_TOL
           and div_a and div_b and super_a and super_b and eta > 0.0)
    return IdentifiabilityVerdict(
        scenario, met, ev,
        _met_conclusion(scenario) if met else _NOT_MET)
