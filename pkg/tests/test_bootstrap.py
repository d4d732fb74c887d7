import numpy as np
import pytest

import cbplab as cb
from cbplab._rng import derive_seed
from cbplab.errors import MseRunFailed


def _run_from(estimates, B=None):
    est = np.asarray(estimates, dtype=float)
    return cb.BootstrapRun(family="poisson_offspring", params={"lam": 1.0},
                           n=10, B=B or est.shape[0], seed=0,
                           param_names=("lam",), estimates=est,
                           failures=(), n_extinct=0)


# --- percentile intervals ---


def test_ci_constant_replicates_is_degenerate():
    run = _run_from(np.full((5, 1), 2.0))
    assert cb.ci_percentile(run, 0.95) == {"lam": (2.0, 2.0)}


def test_ci_interpolated_quantile_oracle():
    run = _run_from(np.arange(1.0, 101.0).reshape(100, 1))
    lo, hi = cb.ci_percentile(run, 0.90)["lam"]
    assert lo == pytest.approx(5.95)
    assert hi == pytest.approx(95.05)


def test_ci_ignores_failed_replicates():
    rows = np.vstack([np.arange(1.0, 101.0).reshape(100, 1),
                      np.full((2, 1), np.nan)])
    lo, hi = cb.ci_percentile(_run_from(rows), 0.90)["lam"]
    assert (lo, hi) == (pytest.approx(5.95), pytest.approx(95.05))


def test_ci_level_validation():
    run = _run_from(np.full((5, 1), 2.0))
    for level in (0.0, 1.0, -0.3, 1.7):
        with pytest.raises(ValueError):
            cb.ci_percentile(run, level)


def test_ci_needs_two_successes():
    rows = np.full((4, 1), np.nan)
    rows[0] = 1.0
    with pytest.raises(MseRunFailed):
        cb.ci_percentile(_run_from(rows), 0.95)


def test_bootstrap_run_validation():
    with pytest.raises(ValueError):
        _run_from(np.full((1, 1), 2.0))
    with pytest.raises(ValueError):
        _run_from(np.full((5, 2), 2.0), B=5)


# --- parametric bootstrap ---


def test_deterministic_family_zero_width_interval():
    fam = cb.OffspringSimplexFamily(1, cb.DeterministicControl(), 4)
    run = cb.parametric_bootstrap({"p0": 0.0, "p1": 1.0}, fam, n=4, B=3,
                                  seed=5, method=cb.ExactConvolution(),
                                  n_starts=1)
    assert run.failures == ()
    assert run.n_extinct == 0
    assert (run.estimates == run.estimates[0]).all()
    for lo, hi in cb.ci_percentile(run, 0.95).values():
        assert lo == hi


def test_two_replicates_is_legal():
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 8)
    run = cb.parametric_bootstrap({"lam": 1.2}, fam, n=5, B=2, seed=9,
                                  method=cb.PgfInversion(), n_starts=1)
    assert run.estimates.shape == (2, 1)
    assert run.estimates[0, 0] != run.estimates[1, 0]
    with pytest.raises(ValueError):
        cb.parametric_bootstrap({"lam": 1.2}, fam, n=5, B=1, seed=9)
    with pytest.raises(ValueError):
        cb.parametric_bootstrap({"lam": 1.2}, fam, n=0, B=2, seed=9)


def test_bootstrap_reproducible_and_seed_sensitive():
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 8)
    kw = dict(n=5, B=4, method=cb.PgfInversion(), n_starts=1)
    a = cb.parametric_bootstrap({"lam": 1.2}, fam, seed=31, **kw)
    b = cb.parametric_bootstrap({"lam": 1.2}, fam, seed=31, **kw)
    c = cb.parametric_bootstrap({"lam": 1.2}, fam, seed=32, **kw)
    assert np.array_equal(a.estimates, b.estimates)
    assert not np.array_equal(a.estimates, c.estimates)


def test_replicate_rows_come_from_derived_seeds():
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 10)
    params = {"lam": 1.2}
    run = cb.parametric_bootstrap(params, fam, n=6, B=4, seed=71,
                                  method=cb.PgfInversion(), n_starts=1)
    r = 2
    traj = cb.simulate(fam.build_natural(params), 6, derive_seed(71, r),
                       record_progenitors=False)
    res = cb.fit_mle(traj, fam, cb.PgfInversion(), seed=derive_seed(71, r),
                     n_starts=1)
    assert run.estimates[r, 0] == pytest.approx(res.params["lam"], rel=1e-6)


def test_three_atom_interval_covers_generating_value():
    fam = cb.OffspringSimplexFamily(2, cb.DeterministicControl(), 20)
    params = {"p0": 0.1538, "p1": 0.6491, "p2": 0.1971}
    run = cb.parametric_bootstrap(params, fam, n=70, B=200, seed=77,
                                  method=cb.PgfInversion(), n_starts=1)
    assert len(run.failures) <= 10
    lo, hi = cb.ci_percentile(run, 0.95)["p0"]
    assert lo <= 0.1538 <= hi
    # neither degenerate nor vacuous
    assert 0.02 <= hi - lo <= 0.5


# --- MSE curves ---


def test_mse_zero_variance_family():
    # every replicate is the same constant path; the optimizer parks the
    # free logit at the simplex corner, so squared errors underflow to 0
    fam = cb.OffspringSimplexFamily(1, cb.DeterministicControl(), 5)
    curve = cb.mse_curve(fam, {"p0": 0.0, "p1": 1.0}, [3, 5], B=3, seed=2,
                         method=cb.ExactConvolution(), n_starts=1)
    assert curve.param_names == ("p0", "p1", "m", "sigma2")
    assert (curve.mse < 1e-40).all()
    assert (curve.sd == 0.0).all()


def test_mse_moment_based_decreases_with_length():
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 30)
    curve = cb.mse_curve(fam, {"lam": 1.05}, [10, 40], B=40, seed=13,
                         estimator="moment-based")
    j = curve.param_names.index("lam")
    assert curve.mse[1, j] < curve.mse[0, j]


def test_mse_reproducible_and_thread_invariant():
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 12)
    kw = dict(lengths=[6, 9], B=8, seed=4, estimator="moment-based")
    a = cb.mse_curve(fam, {"lam": 1.1}, **kw)
    b = cb.mse_curve(fam, {"lam": 1.1}, **kw)
    c = cb.mse_curve(fam, {"lam": 1.1}, threads=3, **kw)
    for other in (b, c):
        assert np.array_equal(a.mse, other.mse)
        assert np.array_equal(a.sd, other.sd)
        for x, y in zip(a.estimates, other.estimates):
            assert np.array_equal(x, y)


def test_mse_argument_validation():
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 12)
    with pytest.raises(ValueError):
        cb.mse_curve(fam, {"lam": 1.1}, [5, 10], B=4, seed=0,
                     estimator="map")
    with pytest.raises(ValueError):
        cb.mse_curve(fam, {"lam": 1.1}, [], B=4, seed=0)
    with pytest.raises(ValueError):
        cb.mse_curve(fam, {"lam": 1.1}, [10, 10], B=4, seed=0)


def test_mse_failure_budget_aborts_run():
    # two moments cannot pin down a four-atom simplex, so the moment-based
    # estimator fails on every replicate
    fam = cb.OffspringSimplexFamily(3, cb.DeterministicControl(), 10)
    truth = {"p0": 0.1, "p1": 0.5, "p2": 0.3, "p3": 0.1}
    with pytest.raises(MseRunFailed):
        cb.mse_curve(fam, truth, [5], B=4, seed=0, estimator="moment-based")


def test_mse_mle_shapes_and_accounting():
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 15)
    curve = cb.mse_curve(fam, {"lam": 1.1}, [6, 12], B=12, seed=8,
                         method=cb.PgfInversion(), n_starts=1)
    assert curve.param_names == ("lam", "m", "sigma2")
    assert curve.mse.shape == (2, 3)
    assert curve.sd.shape == (2, 3)
    assert curve.n_failures == (0, 0)
    assert len(curve.n_extinct) == 2
    assert len(curve.estimates) == 2
    assert curve.estimates[0].shape == (12, 3)
    # rate and derived mean coincide for this family
    assert np.array_equal(curve.mse[:, 0], curve.mse[:, 1])


# --- interval coverage ---


def test_percentile_coverage_band():
    # high-information regime: percentile intervals under-cover when paths
    # flirt with extinction, so the generating model keeps that probability
    # below 1% and each trajectory carries thousands of progenitors
    fam = cb.PoissonOffspringFamily(cb.DeterministicControl(), 60)
    truth = 1.05
    model = fam.build_natural({"lam": truth})
    method = cb.PgfInversion()
    hits = 0
    n_outer = 40
    for rep in range(n_outer):
        data = cb.simulate(model, 30, derive_seed(500, rep),
                           record_progenitors=False)
        fit = cb.fit_mle(data, fam, method, seed=0, n_starts=1)
        run = cb.parametric_bootstrap(fit, fam, 30, 40,
                                      seed=derive_seed(501, rep),
                                      method=method, n_starts=1)
        lo, hi = cb.ci_percentile(run, 0.95)["lam"]
        hits += int(lo <= truth <= hi)
    assert hits >= 0.85 * n_outer


# --- CSV output ---


def test_write_bootstrap_csv(tmp_path):
    est = np.array([[0.5], [np.nan], [0.25]])
    run = cb.BootstrapRun(family="poisson_offspring", params={"lam": 1.0},
                          n=10, B=3, seed=0, param_names=("lam",),
                          estimates=est, failures=((1, "DidNotConverge"),),
                          n_extinct=0)
    path = tmp_path / "boot.csv"
    cb.write_bootstrap_csv(run, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "replicate,lam"
    assert lines[1] == "0,0.5"
    assert lines[2] == "1,"
    assert lines[3] == "2,0.25"


def test_write_mse_csv(tmp_path):
    curve = cb.MseCurve(lengths=np.array([5, 10]), param_names=("lam",),
                        mse=np.array([[0.25], [1.0 / 3.0]]),
                        sd=np.array([[0.5], [0.5]]), B=4, seed=9,
                        estimator="mle", n_failures=(0, 0),
                        n_extinct=(0, 0),
                        estimates=(np.zeros((4, 1)), np.zeros((4, 1))))
    path = tmp_path / "mse.csv"
    cb.write_mse_csv(curve, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "length,param,mse,B,seed"
    assert lines[1] == "5,lam,0.25,4,9"
    assert lines[2] == "10,lam,0.33333333333333331,4,9"
