"""Command-line entry point.

One subcommand per workflow step, file-based I/O throughout: models and
verdicts travel as JSON, trajectories and experiment results as CSV with
full-precision (17 significant digit) numbers. Exit codes: 0 success,
2 input/validation problem, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import estimators as est
from .bootstrap import (ci_percentile, mse_curve, parametric_bootstrap,
                        write_bootstrap_csv, write_mse_csv)
from .errors import CbplabError, SchemaError
from .likelihood import (DiscretisedNormalApprox, ExactConvolution,
                         OffspringSimplexFamily, PgfInversion,
                         PoissonOffspringFamily, fit_mle, fit_to_json,
                         log_likelihood)
from .model import (CbpModel, check_regularity, mean_growth_rate,
                    model_from_json)
from .pmf import Pmf, convolve_power, pmf_moments
from .simulate import (batch_simulate, read_trajectory_csv, simulate,
                       write_trajectory_csv)
from .dn import DiscretisedNormal
from .tvd import (decay_scan, dn_tvd_bound, fourth_central_next_step,
                  identifiability_check, one_step_tvd, stein_dn_bound,
                  tvd_exact)


class _Usage(Exception):
    """Input problem that should exit with code 2."""


_USAGE_ERRORS = (_Usage, SchemaError, OSError, json.JSONDecodeError,
                 ValueError, KeyError)


def _f17(x) -> str:
    return format(float(x), ".17g")


def _usage(exc) -> int:
    print(f"cbplab: {exc}", file=sys.stderr)
    return 2


def _req(args, name):
    val = getattr(args, name, None)
    if val is None:
        raise _Usage(f"{name.replace('_', '-')}: required")
    return val


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _load_model(path) -> CbpModel:
    return model_from_json(_load_json(path))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def _emit_json(payload, out_path) -> None:
    text = json.dumps(_jsonable(payload), indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _int_list(raw) -> list:
    if isinstance(raw, (list, tuple)):
        return [int(v) for v in raw]
    return [int(tok) for tok in str(raw).split(",") if tok.strip()]


def _float_list(raw) -> list:
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    return [float(tok) for tok in str(raw).split(",") if tok.strip()]


_METHODS = {
    "auto": None,
    "exact": ExactConvolution(),
    "pgf": PgfInversion(),
    "dn": DiscretisedNormalApprox(),
}


def _method(args):
    name = getattr(args, "method", None) or "auto"
    if name not in _METHODS:
        raise _Usage(f"method: must be one of {sorted(_METHODS)}")
    return _METHODS[name]


def _family(model: CbpModel, name, K, z0):
    ctrl = model.control
    if name in (None, "simplex"):
        return OffspringSimplexFamily(int(K or 2), ctrl, z0)
    if name == "poisson":
        return PoissonOffspringFamily(ctrl, z0)
    raise _Usage("family: must be 'simplex' or 'poisson'")


def _family_from_fit(fit_doc, model: CbpModel, z0):
    fam = fit_doc.get("family")
    params = fit_doc.get("params")
    if not isinstance(params, dict):
        raise _Usage("fit file: params must be an object")
    if fam == "offspring_simplex":
        return OffspringSimplexFamily(len(params) - 1, model.control, z0)
    if fam == "poisson_offspring":
        return PoissonOffspringFamily(model.control, z0)
    raise _Usage(f"fit file: unknown family {fam!r}")


def _grid(zmin, zmax, points) -> list:
    pts = np.unique(np.round(np.geomspace(zmin, zmax, points)))
    return [int(z) for z in pts]


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_simulate(a) -> int:
    try:
        model = _load_model(_req(a, "model"))
        n = int(_req(a, "n"))
        seed = int(_req(a, "seed"))
        out = _req(a, "out")
        paths = int(a.paths) if a.paths is not None else 1
        record = not bool(a.no_progenitors)
    except _USAGE_ERRORS as e:
        return _usage(e)
    if paths == 1:
        write_trajectory_csv(simulate(model, n, seed,
                                      record_progenitors=record), out)
    else:
        trajs = batch_simulate(model, paths, n, seed,
                               record_progenitors=record)
        stem, dot, ext = out.rpartition(".")
        for i, traj in enumerate(trajs):
            path = f"{stem}-{i:04d}.{ext}" if dot else f"{out}-{i:04d}"
            write_trajectory_csv(traj, path)
    return 0


def _cmd_estimate(a) -> int:
    try:
        traj = read_trajectory_csv(_req(a, "in_path"))
        out = _req(a, "out")
        model = _load_model(a.model) if a.model else None
        m_known = float(a.m) if a.m is not None else None
        g_known = float(a.g) if a.g is not None else None
        alpha_known = float(a.alpha) if a.alpha is not None else None
        q_drift = float(a.q) if a.q is not None else None
    except _USAGE_ERRORS as e:
        return _usage(e)
    reports = []
    attempts = [lambda: est.bgwp_mean(traj),
                lambda: est.growth_rate_estimate(traj),
                lambda: est.noise_rate_estimate(traj)]
    if g_known is not None:
        attempts.append(lambda: est.noise_rate_estimate_known_growth(
            traj, g_known))
    if model is not None:
        attempts.append(lambda: est.mean_known_control(traj, model.control))
        attempts.append(lambda: est.var_known_control(traj, model.control))
        if m_known is not None:
            attempts.append(lambda: est.var_known_control_known_mean(
                traj, model.control, m_known))
    if traj.progenitors is not None:
        attempts.append(lambda: est.mean_observed_progenitors(traj))
        attempts.append(lambda: est.var_observed_progenitors(traj))
        attempts.append(lambda: est.control_slope_observed(traj))
        attempts.append(lambda: est.control_noise_observed(traj))
        if m_known is not None:
            attempts.append(lambda: est.var_observed_progenitors_known_mean(
                traj, m_known))
        if alpha_known is not None:
            attempts.append(
                lambda: est.control_noise_observed_known_slope(
                    traj, alpha_known))
    if q_drift is not None and m_known is not None:
        attempts.append(lambda: est.power_drift_estimate(
            traj, m_known, q_drift))
        attempts.append(lambda: est.power_drift_estimate_avg(
            traj, m_known, q_drift))
    for attempt in attempts:
        try:
            reports.append(attempt())
        except CbplabError as exc:
            print(f"cbplab: skipped estimator: {exc}", file=sys.stderr)
    if not reports:
        print("cbplab: no estimator was computable", file=sys.stderr)
        return 1
    est.write_estimates_csv(reports, out, seed=traj.seed)
    return 0


def _cmd_fit(a) -> int:
    try:
        traj = read_trajectory_csv(_req(a, "in_path"))
        model = _load_model(_req(a, "model"))
        z0 = max(int(traj.sizes[0]), 1)
        family = _family(model, a.family, a.K, z0)
        method = _method(a)
        seed = int(a.seed) if a.seed is not None else 0
        n_starts = int(a.starts) if a.starts is not None else 8
    except _USAGE_ERRORS as e:
        return _usage(e)
    result = fit_mle(traj, family, method, seed=seed, n_starts=n_starts)
    _emit_json(fit_to_json(result, seed), a.out)
    return 0


def _cmd_bootstrap(a) -> int:
    try:
        fit_doc = _load_json(_req(a, "fit"))
        model = _load_model(_req(a, "model"))
        n = int(_req(a, "n"))
        B = int(_req(a, "B"))
        seed = int(_req(a, "seed"))
        out = _req(a, "out")
        family = _family_from_fit(fit_doc, model, model.z0)
        level = float(a.level) if a.level is not None else 0.95
        threads = int(a.threads) if a.threads is not None else None
    except _USAGE_ERRORS as e:
        return _usage(e)
    run = parametric_bootstrap(fit_doc["params"], family, n, B, seed,
                               threads=threads)
    write_bootstrap_csv(run, out)
    intervals = ci_percentile(run, level)
    payload = {
        "family": run.family,
        "n": run.n, "B": run.B, "seed": run.seed, "level": level,
        "n_failures": len(run.failures), "n_extinct": run.n_extinct,
        "ci": {k: list(v) for k, v in intervals.items()},
    }
    _emit_json(payload, a.ci_out)
    return 0


def _cmd_mse_curve(a) -> int:
    try:
        model = _load_model(_req(a, "model"))
        lengths = _int_list(_req(a, "lengths"))
        B = int(_req(a, "B"))
        seed = int(_req(a, "seed"))
        out = _req(a, "out")
        family = _family(model, a.family, a.K, model.z0)
        estimator = a.estimator or "mle"
        threads = int(a.threads) if a.threads is not None else None
        if family.name == "offspring_simplex":
            pm = model.offspring.pmf()
            probs = np.zeros(family.K + 1)
            top = pm.offset + pm.probs.size
            if pm.offset < 0 or top > family.K + 1:
                raise _Usage("model offspring support exceeds {0..K}")
            probs[pm.offset:top] = pm.probs
            truth = {f"p{j}": float(probs[j]) for j in range(family.K + 1)}
        else:
            lam = getattr(model.offspring, "lam", None)
            if lam is None:
                raise _Usage("family 'poisson' needs a poisson offspring "
                             "law in the model file")
            truth = {"lam": float(lam)}
    except _USAGE_ERRORS as e:
        return _usage(e)
    curve = mse_curve(family, truth, lengths, B, seed, estimator=estimator,
                      threads=threads)
    write_mse_csv(curve, out)
    return 0


def _cmd_tvd_scan(a) -> int:
    try:
        model_a = _load_model(_req(a, "a"))
        model_b = _load_model(_req(a, "b"))
        zmin = int(_req(a, "zmin"))
        zmax = int(_req(a, "zmax"))
        points = int(a.points) if a.points is not None else 7
        out = _req(a, "out")
        method = _method(a)
        grid = _grid(zmin, zmax, points)
        if len(grid) < 5:
            raise _Usage("zmin/zmax/points: grid needs at least 5 distinct "
                         "sizes")
    except _USAGE_ERRORS as e:
        return _usage(e)
    scan = decay_scan(model_a, model_b, grid, method)
    rows = []
    for z, val in zip(scan.z_grid, scan.values):
        try:
            bound = one_step_tvd(model_a, model_b, int(z),
                                 "bounded").bound_value
            bound_cell = _f17(bound)
        except (CbplabError, ValueError):
            bound_cell = ""
        rows.append([int(z), _f17(val), bound_cell])
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "tvd_exact", "tvd_bound"])
        writer.writerows(rows)
        fh.write(f"# slope: {_f17(scan.slope)}\n")
    return 0


def _cmd_bounds(a) -> int:
    try:
        ns = _int_list(_req(a, "n"))
        if a.chi is not None:
            offset = int(a.chi_offset) if a.chi_offset is not None else 0
            increment = Pmf.from_probs(_float_list(a.chi), offset)
        elif a.model is not None and a.z is not None:
            from .tvd import _increment_compound
            increment = _increment_compound(_load_model(a.model), int(a.z))
        else:
            raise _Usage("bounds: provide --chi or both --model and --z")
        out = _req(a, "out")
    except _USAGE_ERRORS as e:
        return _usage(e)
    ms = pmf_moments(increment)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "exact_tvd", "bound_value"])
        for n in ns:
            report = stein_dn_bound(increment, n)
            exact_cell = ""
            target = DiscretisedNormal(n * ms.mean, n * ms.var)
            span = (increment.offset + increment.probs.size - 1) * n
            if span <= (1 << 20):
                s_n = convolve_power(increment, n)
                exact, _ = tvd_exact(s_n, target.materialize())
                exact_cell = _f17(exact)
            writer.writerow([n, exact_cell, _f17(report.bound_value)])
    return 0


_SCENARIO_NAMES = {
    "known-control": "KnownControl",
    "unknown-control": "UnknownControl",
    "observed-progenitors": "ObservedProgenitors",
}


def _cmd_ident_check(a) -> int:
    try:
        model_a = _load_model(_req(a, "a"))
        model_b = _load_model(_req(a, "b"))
        raw = _req(a, "scenario")
        scenario = _SCENARIO_NAMES.get(raw, raw)
        if scenario not in _SCENARIO_NAMES.values():
            raise _Usage(f"scenario: must be one of "
                         f"{sorted(_SCENARIO_NAMES)}")
        seed = int(a.seed) if a.seed is not None else 0
        grid = None
        if a.zmin is not None or a.zmax is not None:
            zmin = int(a.zmin) if a.zmin is not None else 16
            zmax = int(a.zmax) if a.zmax is not None else 4096
            points = int(a.points) if a.points is not None else 9
            grid = _grid(zmin, zmax, points)
    except _USAGE_ERRORS as e:
        return _usage(e)
    verdict = identifiability_check(model_a, model_b, scenario,
                                    z_grid=grid, seed=seed)
    _emit_json({
        "scenario": verdict.scenario,
        "conditions_met": verdict.conditions_met,
        "evidence": verdict.evidence,
        "conclusion": verdict.conclusion,
    }, a.out)
    return 0


def _cmd_moments(a) -> int:
    try:
        model = _load_model(_req(a, "model"))
        z = int(a.z) if a.z is not None else model.z0
        zmax = int(a.zmax) if a.zmax is not None else max(4096, model.z0)
    except _USAGE_ERRORS as e:
        return _usage(e)
    ms = model.offspring.moments()
    report = check_regularity(model, zmax)
    from .likelihood import conditional_moments
    mean1, var1 = conditional_moments(model, z)
    payload = {
        "model_id": model.model_id,
        "offspring": {
            "mean": ms.mean, "var": ms.var,
            "third_central": ms.third_central,
            "third_abs_central": ms.third_abs_central,
            "fourth_central": ms.fourth_central, "lattice": ms.lattice,
        },
        "control_at_z": {
            "z": z,
            "eps": model.control.eps(z), "nu2": model.control.nu2(z),
            "iota": model.control.iota(z),
            "kappa4": model.control.kappa4(z),
        },
        "next_size_at_z": {
            "mean": mean1, "var": var1,
            "fourth_central": fourth_central_next_step(model, z),
        },
        "growth_rate_at_z": mean_growth_rate(model, z),
        "regularity": {
            "a_hat": report.a_hat, "b_hat": report.b_hat,
            "c_hat": report.c_hat, "d_hat": report.d_hat,
            "tau_liminf_hat": report.tau_liminf_hat,
            "supercritical": report.supercritical,
            "lattice_ok": report.lattice_ok, "eta_hat": report.eta_hat,
            "z_max": zmax,
        },
    }
    _emit_json(payload, a.out)
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "fit": _cmd_fit,
    "bootstrap": _cmd_bootstrap,
    "mse-curve": _cmd_mse_curve,
    "tvd-scan": _cmd_tvd_scan,
    "bounds": _cmd_bounds,
    "ident-check": _cmd_ident_check,
    "moments": _cmd_moments,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cbplab",
        description="Simulation, estimation, and distance bounds for "
                    "controlled branching processes")
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {}

    def cmd(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="JSON file with defaults for this "
                                        "subcommand's flags")
        p.add_argument("--threads", help="worker threads (default: "
                                         "CBPLAB_THREADS or all cores)")
        parsers[name] = p
        return p

    p = cmd("simulate", help="simulate a trajectory to CSV")
    p.add_argument("--model")
    p.add_argument("--n")
    p.add_argument("--seed")
    p.add_argument("--out")
    p.add_argument("--paths")
    p.add_argument("--no-progenitors", action="store_true", default=None)

    p = cmd("estimate", help="run every applicable estimator on a "
                             "trajectory CSV")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--out")
    p.add_argument("--model")
    p.add_argument("--m")
    p.add_argument("--g")
    p.add_argument("--alpha")
    p.add_argument("--q")

    p = cmd("fit", help="maximum-likelihood fit of an offspring family")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--model")
    p.add_argument("--family")
    p.add_argument("--K")
    p.add_argument("--out")
    p.add_argument("--seed")
    p.add_argument("--starts")
    p.add_argument("--method")

    p = cmd("bootstrap", help="parametric bootstrap around a fit")
    p.add_argument("--fit")
    p.add_argument("--model")
    p.add_argument("--n")
    p.add_argument("--B")
    p.add_argument("--seed")
    p.add_argument("--out")
    p.add_argument("--level")
    p.add_argument("--ci-out", dest="ci_out")

    p = cmd("mse-curve", help="MSE versus trajectory length")
    p.add_argument("--model")
    p.add_argument("--family")
    p.add_argument("--K")
    p.add_argument("--lengths")
    p.add_argument("--B")
    p.add_argument("--seed")
    p.add_argument("--estimator")
    p.add_argument("--out")

    p = cmd("tvd-scan", help="one-step TVD decay across sizes")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--zmin")
    p.add_argument("--zmax")
    p.add_argument("--points")
    p.add_argument("--method")
    p.add_argument("--out")

    p = cmd("bounds", help="sum-vs-rounded-normal bound table")
    p.add_argument("--chi")
    p.add_argument("--chi-offset", dest="chi_offset")
    p.add_argument("--model")
    p.add_argument("--z")
    p.add_argument("--n")
    p.add_argument("--out")

    p = cmd("ident-check", help="identifiability verdict for a model pair")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--scenario")
    p.add_argument("--zmin")
    p.add_argument("--zmax")
    p.add_argument("--points")
    p.add_argument("--seed")
    p.add_argument("--out")

    p = cmd("moments", help="model moment and regularity report")
    p.add_argument("--model")
    p.add_argument("--z")
    p.add_argument("--zmax")
    p.add_argument("--out")

    return parser, parsers


def _merge_config(args, parsers) -> None:
    """Fill unset flags from --config JSON; unknown keys are rejected."""
    if not getattr(args, "config", None):
        return
    doc = _load_json(args.config)
    if not isinstance(doc, dict):
        raise SchemaError("config", "must be a JSON object")
    allowed = {act.dest for act in parsers[args.command]._actions
               if act.dest not in ("help", "config")}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest not in allowed:
            raise SchemaError(f"config.{key}", "unknown field")
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)


def main(argv=None) -> int:
    parser, parsers = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _merge_config(args, parsers)
    except _USAGE_ERRORS as exc:
        return _usage(exc)
    try:
        return _HANDLERS[args.command](args)
    except _USAGE_ERRORS as exc:
        if isinstance(exc, (_Usage, SchemaError)):
            return _usage(exc)
        print(f"cbplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except CbplabError as exc:
        print(f"cbplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def run(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
