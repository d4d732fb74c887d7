"""Moment-ratio estimators for branching trajectories.

Three observation schemes are covered, each with its own estimator set:

* control law fully known: offspring mean and variance from size counts,
  using the known per-size control mean and variance;
* sizes only, control with linear mean alpha*z and variance beta*z: the
  mean growth rate g = m*alpha and the noise rate h = sigma^2*alpha +
  m^2*beta (the individually attributed parameters are not recoverable
  from sizes alone);
* progenitor counts observed alongside sizes: all four of m, sigma^2,
  alpha, beta.

Variance-type estimators come in two versions: a "known-mean" version
that plugs in the true first-order parameter, and a plug-in version that
replaces it with the single-transition pilot ratio from the latest usable
transition. Pilots taken from an earlier transition (because the nominal
one divides by zero) are flagged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (AllZero, EmptyIndexSet, MissingProgenitors,
                     ZeroPopulation)
from .model import ControlSpec
from .simulate import Trajectory


@dataclass(frozen=True)
class EstimateReport:
    """One estimator evaluation: value plus provenance of its inputs."""

    name: str
    value: float
    n_terms: int
    inputs_used: tuple
    flags: tuple = field(default=())


def _eps_index(traj: Trajectory, control: ControlSpec) -> list:
    """Transitions k (1-based) with positive control mean at Z_{k-1}."""
    return [k for k in range(1, traj.sizes.size)
            if control.eps(int(traj.sizes[k - 1])) > 0.0]


def _pos_index(traj: Trajectory) -> list:
    """Transitions k (1-based) with Z_{k-1} > 0."""
    return [k for k in range(1, traj.sizes.size) if traj.sizes[k - 1] > 0]


def _prog_index(traj: Trajectory) -> list:
    """Transitions k (1-based) with a positive observed progenitor count."""
    return [k for k in range(1, traj.sizes.size)
            if traj.progenitors[k - 1] > 0]


def _need_progenitors(traj: Trajectory) -> None:
    if traj.progenitors is None:
        raise MissingProgenitors("trajectory has no recorded progenitor "
                                 "counts")


def _pilot_flags(k_star: int, nominal: int) -> tuple:
    return () if k_star == nominal else ("pilot_from_earlier_transition",)


def _variance_flags(value: float) -> tuple:
    return ("negative_variance",) if value < 0.0 else ()


# ---------------------------------------------------------------------------
# uncontrolled process, sizes only


def bgwp_mean(traj: Trajectory) -> EstimateReport:
    """Offspring mean as total offspring over total parents.

    The classic ratio-of-sums estimator sum Z_k / sum Z_{k-1}; only valid
    as stated when every individual reproduces (identity control).
    """
    num = int(traj.sizes[1:].sum())
    den = int(traj.sizes[:-1].sum())
    if den == 0:
        raise AllZero("every parent generation is empty")
    n_terms = len(_pos_index(traj))
    return EstimateReport("bgwp_mean", num / den, n_terms, ("sizes",))


# ---------------------------------------------------------------------------
# known control law


def mean_known_control(traj: Trajectory,
                       control: ControlSpec) -> EstimateReport:
    """Average of Z_k / eps(Z_{k-1}) over transitions with eps > 0."""
    idx = _eps_index(traj, control)
    if not idx:
        raise EmptyIndexSet("no transition has positive control mean")
    terms = [traj.sizes[k] / control.eps(int(traj.sizes[k - 1]))
             for k in idx]
    return EstimateReport("mean_known_control", float(np.mean(terms)),
                          len(idx), ("sizes", "control_spec"))


def _var_known_control_sum(traj, control, idx, m_value):
    terms = []
    for k in idx:
        z_prev = int(traj.sizes[k - 1])
        eps = control.eps(z_prev)
        dev = traj.sizes[k] - m_value * eps
        terms.append((dev * dev - m_value**2 * control.nu2(z_prev)) / eps)
    return float(np.mean(terms))


def var_known_control_known_mean(traj: Trajectory, control: ControlSpec,
                                 m: float) -> EstimateReport:
    """Offspring variance with the true offspring mean plugged in.

    Each term subtracts the control-noise contribution m^2 * nu2(Z_{k-1})
    before normalizing by eps(Z_{k-1})."""
    idx = _eps_index(traj, control)
    if not idx:
        raise EmptyIndexSet("no transition has positive control mean")
    value = _var_known_control_sum(traj, control, idx, float(m))
    return EstimateReport("var_known_control_known_mean", value, len(idx),
                          ("sizes", "control_spec", "m"),
                          _variance_flags(value))


def var_known_control(traj: Trajectory,
                      control: ControlSpec) -> EstimateReport:
    """Offspring variance with the pilot ratio Z_n / eps(Z_{n-1}) plugged
    in for the unknown mean."""
    idx = _eps_index(traj, control)
    if not idx:
        raise EmptyIndexSet("no transition has positive control mean")
    k_star = idx[-1]
    pilot = traj.sizes[k_star] / control.eps(int(traj.sizes[k_star - 1]))
    value = _var_known_control_sum(traj, control, idx, float(pilot))
    flags = _pilot_flags(k_star, traj.n_transitions) + _variance_flags(value)
    return EstimateReport("var_known_control", value, len(idx),
                          ("sizes", "control_spec"), flags)


# ---------------------------------------------------------------------------
# sizes only, linear control moments


def growth_rate_estimate(traj: Trajectory) -> EstimateReport:
    """Average of Z_k / Z_{k-1}: estimates g = m * alpha."""
    idx = _pos_index(traj)
    if not idx:
        raise EmptyIndexSet("no transition starts from a positive size")
    terms = [traj.sizes[k] / traj.sizes[k - 1] for k in idx]
    return EstimateReport("growth_rate_estimate", float(np.mean(terms)),
                          len(idx), ("sizes",))


def _noise_rate_sum(traj, idx, g_value):
    terms = []
    for k in idx:
        dev = traj.sizes[k] - g_value * traj.sizes[k - 1]
        terms.append(dev * dev / traj.sizes[k - 1])
    return float(np.mean(terms))


def noise_rate_estimate_known_growth(traj: Trajectory,
                                     g: float) -> EstimateReport:
    """Noise rate h = sigma^2*alpha + m^2*beta with the true growth rate
    g = m*alpha plugged in."""
    idx = _pos_index(traj)
    if not idx:
        raise EmptyIndexSet("no transition starts from a positive size")
    value = _noise_rate_sum(traj, idx, float(g))
    return EstimateReport("noise_rate_estimate_known_growth", value,
                          len(idx), ("sizes", "g"), _variance_flags(value))


def noise_rate_estimate(traj: Trajectory) -> EstimateReport:
    """Noise rate with the pilot ratio Z_n / Z_{n-1} plugged in."""
    idx = _pos_index(traj)
    if not idx:
        raise EmptyIndexSet("no transition starts from a positive size")
    k_star = idx[-1]
    pilot = traj.sizes[k_star] / traj.sizes[k_star - 1]
    value = _noise_rate_sum(traj, idx, float(pilot))
    flags = _pilot_flags(k_star, traj.n_transitions) + _variance_flags(value)
    return EstimateReport("noise_rate_estimate", value, len(idx),
                          ("sizes",), flags)


def control_mean_slope_from_growth(g_hat: float, m: float) -> float:
    """alpha = g / m once the offspring mean is known from elsewhere."""
    if m <= 0:
        raise ValueError("m must be positive")
    return float(g_hat) / float(m)


def control_var_slope_from_noise(g_hat: float, h_hat: float, m: float,
                                 sigma2: float) -> float:
    """beta = (m*h - sigma^2*g) / m^3 once m and sigma^2 are known."""
    if m <= 0:
        raise ValueError("m must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    return (float(m) * float(h_hat) - float(sigma2) * float(g_hat)) / m**3


# ---------------------------------------------------------------------------
# observed progenitor counts


def mean_observed_progenitors(traj: Trajectory) -> EstimateReport:
    """Average of Z_k / phi(Z_{k-1}) over positive progenitor draws."""
    _need_progenitors(traj)
    idx = _prog_index(traj)
    if not idx:
        raise EmptyIndexSet("no transition has a positive progenitor count")
    terms = [traj.sizes[k] / traj.progenitors[k - 1] for k in idx]
    return EstimateReport("mean_observed_progenitors", float(np.mean(terms)),
                          len(idx), ("sizes", "progenitors"))


def _var_observed_sum(traj, idx, m_value):
    terms = []
    for k in idx:
        u = traj.progenitors[k - 1]
        dev = traj.sizes[k] - m_value * u
        terms.append(dev * dev / u)
    return float(np.mean(terms))


def var_observed_progenitors_known_mean(traj: Trajectory,
                                        m: float) -> EstimateReport:
    _need_progenitors(traj)
    idx = _prog_index(traj)
    if not idx:
        raise EmptyIndexSet("no transition has a positive progenitor count")
    value = _var_observed_sum(traj, idx, float(m))
    return EstimateReport("var_observed_progenitors_known_mean", value,
                          len(idx), ("sizes", "progenitors", "m"),
                          _variance_flags(value))


def var_observed_progenitors(traj: Trajectory) -> EstimateReport:
    """Offspring variance with the pilot Z_n / phi(Z_{n-1}) plugged in."""
    _need_progenitors(traj)
    idx = _prog_index(traj)
    if not idx:
        raise EmptyIndexSet("no transition has a positive progenitor count")
    k_star = idx[-1]
    pilot = traj.sizes[k_star] / traj.progenitors[k_star - 1]
    value = _var_observed_sum(traj, idx, float(pilot))
    flags = _pilot_flags(k_star, traj.n_transitions) + _variance_flags(value)
    return EstimateReport("var_observed_progenitors", value, len(idx),
                          ("sizes", "progenitors"), flags)


def _minus_index(traj: Trajectory) -> list:
    """Generations k (0-based, k <= n-1) with Z_k > 0 and phi(Z_k)
    recorded."""
    return [k for k in range(traj.progenitors.size) if traj.sizes[k] > 0]


def control_slope_observed(traj: Trajectory) -> EstimateReport:
    """Average of phi(Z_k) / Z_k: estimates the control mean slope
    alpha."""
    _need_progenitors(traj)
    idx = _minus_index(traj)
    if not idx:
        raise EmptyIndexSet("no generation with positive size has an "
                            "observed progenitor count")
    terms = [traj.progenitors[k] / traj.sizes[k] for k in idx]
    return EstimateReport("control_slope_observed", float(np.mean(terms)),
                          len(idx), ("sizes", "progenitors"))


def _control_noise_sum(traj, idx, alpha_value):
    terms = []
    for k in idx:
        dev = traj.progenitors[k] - alpha_value * traj.sizes[k]
        terms.append(dev * dev / traj.sizes[k])
    return float(np.mean(terms))


def control_noise_observed_known_slope(traj: Trajectory,
                                       alpha: float) -> EstimateReport:
    _need_progenitors(traj)
    idx = _minus_index(traj)
    if not idx:
        raise EmptyIndexSet("no generation with positive size has an "
                            "observed progenitor count")
    value = _control_noise_sum(traj, idx, float(alpha))
    return EstimateReport("control_noise_observed_known_slope", value,
                          len(idx), ("sizes", "progenitors", "alpha"),
                          _variance_flags(value))


def control_noise_observed(traj: Trajectory) -> EstimateReport:
    """Control variance slope beta with the pilot phi(Z_{n-1}) / Z_{n-1}
    plugged in for alpha."""
    _need_progenitors(traj)
    idx = _minus_index(traj)
    if not idx:
        raise EmptyIndexSet("no generation with positive size has an "
                            "observed progenitor count")
    k_star = idx[-1]
    pilot = traj.progenitors[k_star] / traj.sizes[k_star]
    value = _control_noise_sum(traj, idx, float(pilot))
    flags = (_pilot_flags(k_star, traj.progenitors.size - 1)
             + _variance_flags(value))
    return EstimateReport("control_noise_observed", value, len(idx),
                          ("sizes", "progenitors"), flags)


# ---------------------------------------------------------------------------
# sublinear drift coefficient


def power_drift_estimate(traj: Trajectory, m: float,
                         q: float) -> EstimateReport:
    """(Z_n - m Z_{n-1}) / (m Z_{n-1}^q) from the final transition.

    Estimates the coefficient a of a control mean eps(z) = z + a z^q.
    Only the last transition is informative at the stated rate; it must
    start from a positive size."""
    if q <= 0:
        raise ValueError("q must be positive")
    if m <= 0:
        raise ValueError("m must be positive")
    n = traj.n_transitions
    z_prev = int(traj.sizes[n - 1])
    if z_prev == 0:
        raise ZeroPopulation("final transition starts from size 0")
    value = (traj.sizes[n] - m * z_prev) / (m * z_prev**q)
    return EstimateReport("power_drift_estimate", float(value), 1,
                          ("sizes", "m", "q"))


def power_drift_estimate_avg(traj: Trajectory, m: float, q: float,
                             skip: int = 0) -> EstimateReport:
    """Mean of the per-transition drift ratios over transitions starting
    from positive sizes, optionally skipping an initial burn-in.

    Smoother than the single-transition version; each term has the same
    expectation, and the later terms dominate the averaging error."""
    if q <= 0:
        raise ValueError("q must be positive")
    if m <= 0:
        raise ValueError("m must be positive")
    idx = [k for k in _pos_index(traj) if k > skip]
    if not idx:
        raise EmptyIndexSet("no usable transition after the burn-in")
    terms = []
    for k in idx:
        z_prev = int(traj.sizes[k - 1])
        terms.append((traj.sizes[k] - m * z_prev) / (m * z_prev**q))
    return EstimateReport("power_drift_estimate_avg", float(np.mean(terms)),
                          len(idx), ("sizes", "m", "q"))


# ---------------------------------------------------------------------------
# grouped entry points, one per observation scheme


def known_control_estimates(traj: Trajectory, control: ControlSpec,
                            m_known: Optional[float] = None) -> tuple:
    """(mean, variance) reports for a fully known control law."""
    mean = mean_known_control(traj, control)
    if m_known is None:
        return mean, var_known_control(traj, control)
    return mean, var_known_control_known_mean(traj, control, float(m_known))


def linear_growth_estimates(traj: Trajectory,
                            g_known: Optional[float] = None) -> tuple:
    """(growth rate, noise rate) reports from sizes alone."""
    g = growth_rate_estimate(traj)
    if g_known is None:
        return g, noise_rate_estimate(traj)
    return g, noise_rate_estimate_known_growth(traj, float(g_known))


def progenitor_estimates(traj: Trajectory,
                         m_known: Optional[float] = None,
                         alpha_known: Optional[float] = None) -> tuple:
    """(m, alpha, offspring var, control noise) reports when progenitor
    counts are observed alongside sizes."""
    mean = mean_observed_progenitors(traj)
    slope = control_slope_observed(traj)
    if m_known is None:
        var = var_observed_progenitors(traj)
    else:
        var = var_observed_progenitors_known_mean(traj, float(m_known))
    if alpha_known is None:
        noise = control_noise_observed(traj)
    else:
        noise = control_noise_observed_known_slope(traj, float(alpha_known))
    return mean, slope, var, noise


def derived_control_params(g_hat: float, h_hat: float, m: float,
                           sigma2: float) -> tuple:
    """(alpha, beta) recovered from growth and noise rates once the
    offspring moments are known from elsewhere."""
    return (control_mean_slope_from_growth(g_hat, m),
            control_var_slope_from_noise(g_hat, h_hat, m, sigma2))


# ---------------------------------------------------------------------------
# CSV export


def write_estimates_csv(reports: Sequence[EstimateReport], path: str,
                        seed: Optional[int] = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "value", "n_terms", "seed"])
        for rep in reports:
            writer.writerow([rep.name, format(rep.value, ".17g"),
                             rep.n_terms, "" if seed is None else seed])
