"""Parametric bootstrap and MSE-versus-length experiments.

Replicates are simulated from a generating parameter vector, refit, and
aggregated. Every replicate owns a derived seed, so runs are reproducible
bit for bit and safe to spread over worker threads. Fit failures (an
exception, or an optimizer that hit its iteration cap) are recorded per
replicate, never silently dropped; an MSE run aborts when more than 5% of
replicates fail.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._rng import derive_seed
from .errors import MseRunFailed
from .estimators import mean_known_control, var_known_control
from .likelihood import FitResult, fit_mle
from .model import solve_p_from_moments
from .simulate import simulate

MAX_FAILURE_FRACTION = 0.05


def _n_workers(threads: Optional[int]) -> int:
    if threads is not None:
        return max(int(threads), 1)
    env = os.environ.get("CBPLAB_THREADS")
    if env:
        return max(int(env), 1)
    return os.cpu_count() or 1


def _map_replicates(fn, indices, threads):
    workers = _n_workers(threads)
    if workers == 1:
        return [fn(r) for r in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))


def _generating_params(fitted) -> dict:
    if isinstance(fitted, FitResult):
        return dict(fitted.params)
    return dict(fitted)


def _moment_starts(family, traj) -> list:
    """Extra optimizer start from plug-in moment estimates, when the
    family can invert them. Bad moments (e.g. outside the simplex) just
    mean no extra start."""
    try:
        m_hat = mean_known_control(traj, family.control).value
        v_hat = var_known_control(traj, family.control).value
    except Exception:
        return []
    try:
        nat = family.natural_from_moments(m_hat, v_hat)
        return [family.theta_from_natural(nat)]
    except Exception:
        pass
    # K >= 3 simplices are not pinned down by two moments; seed the
    # optimizer from the K = 2 solution padded with near-zero upper atoms.
    K = getattr(family, "K", None)
    if K is None or K < 3:
        return []
    try:
        pm = solve_p_from_moments(m_hat, v_hat, 2)
    except Exception:
        return []
    probs = np.full(K + 1, 1e-3)
    probs[pm.offset:pm.offset + pm.probs.size] += pm.probs
    probs /= probs.sum()
    nat = {f"p{j}": float(probs[j]) for j in range(K + 1)}
    return [family.theta_from_natural(nat)]


def _fit_replicate(family, params, n, rseed, method, n_starts):
    """Simulate one replicate and refit. Returns (row, extinct, error)."""
    model = family.build_natural(params)
    traj = simulate(model, n, rseed, record_progenitors=False)
    try:
        res = fit_mle(traj, family, method, seed=rseed, n_starts=n_starts,
                      extra_starts=_moment_starts(family, traj))
    except Exception as exc:  # recorded, not fatal
        return None, traj.extinct, f"{type(exc).__name__}: {exc}"
    if not res.converged:
        return None, traj.extinct, "DidNotConverge"
    row = np.array([res.params[name] for name in family.param_names])
    return row, traj.extinct, None


@dataclass(frozen=True)
class BootstrapRun:
    """Replicate parameter estimates from one generating model."""

    family: str
    params: dict
    n: int
    B: int
    seed: int
    param_names: tuple
    estimates: np.ndarray
    failures: tuple
    n_extinct: int

    def __post_init__(self):
        if self.B < 2:
            raise ValueError("B must be >= 2")
        if self.estimates.shape != (self.B, len(self.param_names)):
            raise ValueError("estimates must be B x n_params")


def parametric_bootstrap(fitted, family, n: int, B: int, seed: int,
                         method=None, n_starts: int = 2,
                         threads: Optional[int] = None) -> BootstrapRun:
    """Simulate B trajectories of length n from the fitted parameters and
    refit each; replicate r runs on the seed derived from (seed, r)."""
    if B < 2:
        raise ValueError("B must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    params = _generating_params(fitted)

    def one(r):
        return _fit_replicate(family, params, n, derive_seed(seed, r),
                              method, n_starts)

    results = _map_replicates(one, range(B), threads)
    est = np.full((B, len(family.param_names)), np.nan)
    failures = []
    n_extinct = 0
    for r, (row, extinct, err) in enumerate(results):
        n_extinct += int(extinct)
        if err is not None:
            failures.append((r, err))
        else:
            est[r] = row
    return BootstrapRun(family=family.name, params=params, n=int(n),
                        B=int(B), seed=int(seed),
                        param_names=tuple(family.param_names),
                        estimates=est, failures=tuple(failures),
                        n_extinct=n_extinct)


def ci_percentile(run: BootstrapRun, level: float) -> dict:
    """Per-parameter percentile interval at the given coverage level,
    linear-interpolated over the successful replicates."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    ok = ~np.isnan(run.estimates).any(axis=1)
    if ok.sum() < 2:
        raise MseRunFailed("fewer than 2 successful replicates")
    lo_q = (1.0 - level) / 2.0
    out = {}
    for j, name in enumerate(run.param_names):
        vals = run.estimates[ok, j]
        lo, hi = np.quantile(vals, [lo_q, 1.0 - lo_q], method="linear")
        out[name] = (float(lo), float(hi))
    return out


@dataclass(frozen=True)
class MseCurve:
    """Mean squared error of each parameter at each trajectory length.

    ``mse`` and ``sd`` are lengths x params; ``estimates`` keeps the raw
    per-length replicate matrices (failures as NaN rows) so dispersion
    contrasts between parameters stay inspectable.
    """

    lengths: np.ndarray
    param_names: tuple
    mse: np.ndarray
    sd: np.ndarray
    B: int
    seed: int
    estimator: str
    n_failures: tuple
    n_extinct: tuple
    estimates: tuple

    def __post_init__(self):
        if (np.diff(self.lengths) <= 0).any():
            raise ValueError("lengths must be strictly increasing")


def _truth_vector(family, true_params) -> tuple:
    names = list(family.param_names) + ["m", "sigma2"]
    m, s2 = family.moments_from_natural(true_params)
    vals = [float(true_params[k]) for k in family.param_names] + [m, s2]
    return tuple(names), np.array(vals)


def _estimate_replicate(family, true_params, n, rseed, estimator, method,
                        n_starts):
    model = family.build_natural(true_params)
    traj = simulate(model, n, rseed, record_progenitors=False)
    try:
        if estimator == "mle":
            res = fit_mle(traj, family, method, seed=rseed,
                          n_starts=n_starts,
                          extra_starts=_moment_starts(family, traj))
            if not res.converged:
                return None, traj.extinct, "DidNotConverge"
            nat = res.params
        else:
            m_hat = mean_known_control(traj, family.control).value
            v_hat = var_known_control(traj, family.control).value
            nat = family.natural_from_moments(m_hat, v_hat)
    except Exception as exc:
        return None, traj.extinct, f"{type(exc).__name__}: {exc}"
    m, s2 = family.moments_from_natural(nat)
    row = np.array([float(nat[k]) for k in family.param_names] + [m, s2])
    return row, traj.extinct, None


def mse_curve(family, true_params: dict, lengths: Sequence[int], B: int,
              seed: int, estimator: str = "mle", method=None,
              n_starts: int = 2,
              threads: Optional[int] = None) -> MseCurve:
    """Per-length, per-parameter mean squared error against the truth.

    Alongside the family's own parameters, the derived offspring mean and
    variance are tracked, so identifiable and non-identifiable coordinates
    of the same fit can be compared.
    """
    if estimator not in ("mle", "moment-based"):
        raise ValueError("estimator must be 'mle' or 'moment-based'")
    lengths = [int(n) for n in lengths]
    if not lengths:
        raise ValueError("lengths must be non-empty")
    if any(np.diff(lengths) <= 0):
        raise ValueError("lengths must be strictly increasing")
    true_params = dict(true_params)
    names, truth = _truth_vector(family, true_params)
    all_mse, all_sd, all_fail, all_ext, all_est = [], [], [], [], []
    for li, n in enumerate(lengths):

        def one(r, n=n, li=li):
            return _estimate_replicate(family, true_params, n,
                                       derive_seed(seed, li, r), estimator,
                                       method, n_starts)

        results = _map_replicates(one, range(B), threads)
        est = np.full((B, len(names)), np.nan)
        n_fail = 0
        n_ext = 0
        for r, (row, extinct, err) in enumerate(results):
            n_ext += int(extinct)
            if err is None:
                est[r] = row
            else:
                n_fail += 1
        if n_fail > MAX_FAILURE_FRACTION * B:
            raise MseRunFailed(
                f"{n_fail}/{B} replicates failed at length {n}; above the "
                f"{MAX_FAILURE_FRACTION:.0%} budget")
        ok = est[~np.isnan(est).any(axis=1)]
        all_mse.append(((ok - truth) ** 2).mean(axis=0))
        all_sd.append(ok.std(axis=0, ddof=1))
        all_fail.append(n_fail)
        all_ext.append(n_ext)
        all_est.append(est)
    return MseCurve(lengths=np.array(lengths, dtype=np.int64),
                    param_names=names, mse=np.vstack(all_mse),
                    sd=np.vstack(all_sd), B=int(B), seed=int(seed),
                    estimator=estimator, n_failures=tuple(all_fail),
                    n_extinct=tuple(all_ext), estimates=tuple(all_est))


def write_mse_csv(curve: MseCurve, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["length", "param", "mse", "B", "seed"])
        for i, n in enumerate(curve.lengths):
            for j, name in enumerate(curve.param_names):
                writer.writerow([int(n), name,
                                 format(curve.mse[i, j], ".17g"),
                                 curve.B, curve.seed])


def write_bootstrap_csv(run: BootstrapRun, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate"] + list(run.param_names))
        for r in range(run.B):
            row = run.estimates[r]
            cells = ["" if np.isnan(v) else format(v, ".17g") for v in row]
            writer.writerow([r] + cells)
