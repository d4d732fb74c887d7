"""Toolkit for supercritical controlled branching processes.

Covers simulation, moment and regression-type estimators, transition
likelihoods, total-variation bounds against rounded-normal laws, and the
bootstrap experiments built on top of them.
"""

from .errors import (AllZero, CbplabError, DegenerateIncrement,
                     EmptyIndexSet, ImpossibleTransition, InvalidMixing,
                     MissingMoment, MissingProgenitors, MseRunFailed,
                     NumericalInstability, OutsideSimplex, SchemaError,
                     SupportOverflow, TailTooHeavy, Unidentifiable,
                     UnsupportedMoment, ZeroPopulation)
from .pmf import (MomentSummary, Pmf, convolve, convolve_power, pmf_moments)
from .model import (BinomialLinear, CbpModel, ControlSpec,
                    DeterministicControl, Deterministic, FiniteSupport,
                    Geometric, IidSumControl, OffspringSpec, Poisson,
                    PoissonDrift, PoissonLinear, Binomial, RegularityReport,
                    ScaledDeterministic, check_regularity, mean_growth_rate,
                    model_from_json, solve_p_from_moments)
from .simulate import (Trajectory, batch_simulate, read_trajectory_csv,
                       simulate, write_trajectory_csv)
from .estimators import (EstimateReport, bgwp_mean,
                         control_mean_slope_from_growth,
                         control_noise_observed,
                         control_noise_observed_known_slope,
                         control_slope_observed,
                         control_var_slope_from_noise, derived_control_params,
                         growth_rate_estimate, known_control_estimates,
                         linear_growth_estimates,
                         mean_known_control, mean_observed_progenitors,
                         noise_rate_estimate,
                         noise_rate_estimate_known_growth,
                         power_drift_estimate, power_drift_estimate_avg,
                         progenitor_estimates,
                         var_known_control, var_known_control_known_mean,
                         var_observed_progenitors,
                         var_observed_progenitors_known_mean,
                         write_estimates_csv)
from .dn import DiscretisedNormal
from .likelihood import (DiscretisedNormalApprox, ExactConvolution,
                         FitResult, OffspringSimplexFamily, PgfInversion,
                         PoissonOffspringFamily, compound_pmf,
                         conditional_moments, choose_method, fit_mle,
                         fit_to_json, invert_pgf, log_likelihood,
                         transition_pmf, write_fit_json)
from .tvd import (BoundReport, DecayScan, IdentifiabilityVerdict,
                  cond_mean_var, decay_scan, dn_pmf, dn_tvd_bound,
                  fourth_central_next_step, identifiability_check,
                  lattice_smoothing_tvd, multi_step_bound, one_step_tvd,
                  stein_dn_bound, third_abs_moment_bound, tvd_exact)
from .bootstrap import (BootstrapRun, MseCurve, ci_percentile, mse_curve,
                        parametric_bootstrap, write_bootstrap_csv,
                        write_mse_csv)

__version__ = "0.1.0"

__all__ = [
    "AllZero", "Binomial", "BinomialLinear", "BoundReport", "BootstrapRun",
    "CbpModel", "CbplabError", "ControlSpec", "DecayScan",
    "DegenerateIncrement", "Deterministic", "DeterministicControl",
    "DiscretisedNormal", "DiscretisedNormalApprox", "EmptyIndexSet",
    "EstimateReport", "ExactConvolution", "FiniteSupport", "FitResult",
    "Geometric", "IdentifiabilityVerdict", "IidSumControl",
    "ImpossibleTransition", "InvalidMixing", "MissingMoment",
    "MissingProgenitors", "MomentSummary", "MseCurve", "MseRunFailed",
    "NumericalInstability", "OffspringSimplexFamily", "OffspringSpec",
    "OutsideSimplex", "PgfInversion", "Pmf", "Poisson", "PoissonDrift",
    "PoissonLinear", "PoissonOffspringFamily", "RegularityReport",
    "ScaledDeterministic", "SchemaError", "SupportOverflow", "TailTooHeavy",
    "Trajectory", "Unidentifiable", "UnsupportedMoment", "ZeroPopulation",
    "batch_simulate", "bgwp_mean", "check_regularity", "choose_method",
    "ci_percentile",
    "compound_pmf", "cond_mean_var", "conditional_moments",
    "control_mean_slope_from_growth", "control_noise_observed",
    "control_noise_observed_known_slope", "control_slope_observed",
    "control_var_slope_from_noise", "convolve", "convolve_power",
    "decay_scan", "derived_control_params", "dn_pmf", "dn_tvd_bound",
    "fit_mle", "fit_to_json",
    "fourth_central_next_step", "growth_rate_estimate",
    "identifiability_check", "invert_pgf", "known_control_estimates",
    "lattice_smoothing_tvd", "linear_growth_estimates",
    "log_likelihood", "mean_growth_rate", "mean_known_control",
    "mean_observed_progenitors", "model_from_json", "mse_curve",
    "multi_step_bound", "noise_rate_estimate",
    "noise_rate_estimate_known_growth", "one_step_tvd",
    "parametric_bootstrap", "pmf_moments", "power_drift_estimate",
    "power_drift_estimate_avg", "progenitor_estimates",
    "read_trajectory_csv", "simulate",
    "solve_p_from_moments", "stein_dn_bound", "third_abs_moment_bound",
    "transition_pmf", "tvd_exact", "var_known_control",
    "var_known_control_known_mean", "var_observed_progenitors",
    "var_observed_progenitors_known_mean", "write_bootstrap_csv",
    "write_estimates_csv", "write_fit_json", "write_mse_csv",
    "write_trajectory_csv",
]
