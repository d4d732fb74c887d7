import math
import warnings

import numpy as np
import pytest

import cbplab as cb
from cbplab._rng import derive_seed
from cbplab.errors import ImpossibleTransition


def _traj(sizes):
    return cb.Trajectory(np.array(sizes, dtype=np.int64), None, None, None,
                         extinct=bool(sizes[-1] == 0))


# --- generating-function inversion ---


def test_invert_pgf_poisson_zero_atom():
    pgf = cb.Poisson(1.0).pmf().pgf
    assert cb.invert_pgf(pgf, 0) == pytest.approx(math.exp(-1.0), abs=1e-8)


def test_invert_pgf_point_mass():
    assert cb.invert_pgf(lambda s: np.ones_like(np.asarray(s,
                         dtype=complex)), 0) == pytest.approx(1.0)


def test_invert_pgf_binomial_atom():
    pm = cb.convolve_power(cb.Pmf.from_probs([0.5, 0.5]), 2)
    assert cb.invert_pgf(pm.pgf, 1) == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("name", ["poisson_1", "triangle", "geometric_half",
                                  "binomial_3_03"])
def test_invert_pgf_recovers_whole_vector(increment_corpus, name):
    pm = dict(increment_corpus)[name]
    for k in range(pm.offset + pm.probs.size + 2):
        assert cb.invert_pgf(pm.pgf, k) == pytest.approx(pm.prob(k),
                                                         abs=1e-8)


def test_invert_pgf_gamma_controls_aliasing():
    pm = cb.Poisson(3.0).pmf()
    loose = abs(cb.invert_pgf(pm.pgf, 2, gamma=6.0) - pm.prob(2))
    tight = abs(cb.invert_pgf(pm.pgf, 2, gamma=12.0) - pm.prob(2))
    assert tight < loose
    assert tight < 1e-11


def test_invert_pgf_rejects_negative_k():
    with pytest.raises(ValueError):
        cb.invert_pgf(lambda s: s, -1)


# --- one-step transition laws ---


def test_transition_bgwp_two_parents():
    model = cb.CbpModel(cb.FiniteSupport((0.5, 0.5)),
                        cb.DeterministicControl(), 2)
    law = cb.transition_pmf(model, 2, cb.ExactConvolution())
    assert law.offset == 0
    assert np.allclose(law.probs, [0.25, 0.5, 0.25], atol=1e-15)


def test_transition_unit_offspring_reproduces_control():
    model = cb.CbpModel(cb.Deterministic(1), cb.PoissonLinear(1.7), 4)
    law = cb.transition_pmf(model, 4, cb.ExactConvolution())
    ctrl = model.control.pmf(4)
    val, err = cb.tvd_exact(law, ctrl)
    assert val <= 1e-12 + err


def test_transition_cross_method_poisson_stopped_poisson():
    model = cb.CbpModel(cb.Poisson(1.0), cb.PoissonLinear(1.05), 20)
    exact = cb.transition_pmf(model, 20, cb.ExactConvolution())
    inv = cb.transition_pmf(model, 20, cb.PgfInversion())
    val, err = cb.tvd_exact(exact, inv)
    assert val <= 1e-7 + err


@pytest.mark.parametrize("z", [1, 10, 100])
def test_cross_method_agreement_over_corpus(cross_models, z):
    for model in cross_models:
        exact = cb.transition_pmf(model, z, cb.ExactConvolution())
        inv = cb.transition_pmf(model, z, cb.PgfInversion())
        val, err = cb.tvd_exact(exact, inv)
        assert val <= 1e-6 + err, (model.offspring.family,
                                   model.control.family, z)


def test_transition_from_zero_is_absorbing():
    model = cb.CbpModel(cb.Poisson(2.0), cb.DeterministicControl(), 1)
    law = cb.transition_pmf(model, 0)
    assert law == cb.Pmf.point_mass(0)


def test_choose_method_switches_on_support():
    small = cb.CbpModel(cb.FiniteSupport((0.5, 0.5)),
                        cb.DeterministicControl(), 2)
    assert isinstance(cb.choose_method(small, 2), cb.ExactConvolution)
    huge = cb.CbpModel(cb.Poisson(2.0), cb.PoissonLinear(1.0), 1)
    assert isinstance(cb.choose_method(huge, 10**5), cb.PgfInversion)


def test_dn_transition_moment_match():
    model = cb.CbpModel(cb.Poisson(1.5), cb.PoissonLinear(1.2), 1)
    z = 50
    law = cb.transition_pmf(model, z, cb.DiscretisedNormalApprox())
    mean, var = cb.conditional_moments(model, z)
    mu = float(law.support @ law.probs)
    assert mu == pytest.approx(mean, rel=1e-6)
    v = float(law.support.astype(float) ** 2 @ law.probs) - mu**2
    assert v == pytest.approx(var, rel=1e-3)


def test_dn_method_converges_with_size():
    # the normal surrogate tightens as the population grows
    model_exact = cb.CbpModel(cb.Poisson(2.0), cb.DeterministicControl(), 1)
    last = None
    for z in (16, 64, 256, 1024):
        exact = cb.transition_pmf(model_exact, z, cb.ExactConvolution())
        dn = cb.transition_pmf(model_exact, z, cb.DiscretisedNormalApprox())
        val, err = cb.tvd_exact(exact, dn)
        if last is not None:
            assert val < last
        last = val
    assert last < 0.02


# --- trajectory log-likelihood ---


def test_loglik_deterministic_path_is_zero():
    model = cb.CbpModel(cb.Deterministic(2), cb.DeterministicControl(), 1)
    traj = cb.simulate(model, 6, seed=0)
    assert cb.log_likelihood(traj, model) == pytest.approx(0.0, abs=1e-12)


def test_loglik_bernoulli_oracles():
    model = cb.CbpModel(cb.FiniteSupport((0.5, 0.5)),
                        cb.DeterministicControl(), 2)
    assert cb.log_likelihood(_traj([2, 2]), model) == \
        pytest.approx(math.log(0.25), abs=1e-12)
    assert cb.log_likelihood(_traj([1, 1]), model) == \
        pytest.approx(math.log(0.5), abs=1e-12)


def test_loglik_impossible_transition():
    model = cb.CbpModel(cb.FiniteSupport((0.5, 0.5)),
                        cb.DeterministicControl(), 1)
    with pytest.raises(ImpossibleTransition):
        cb.log_likelihood(_traj([1, 3]), model)
    with pytest.raises(ImpossibleTransition):
        cb.log_likelihood(_traj([2, 0, 1]), model)


def test_loglik_markov_decomposition():
    model = cb.CbpModel(cb.Poisson(1.5), cb.PoissonLinear(1.1), 3)
    traj = cb.simulate(model, 12, seed=5)
    whole = cb.log_likelihood(traj, model)
    split = 0.0
    for k in range(1, traj.sizes.size):
        split += cb.log_likelihood(_traj(traj.sizes[k - 1:k + 1].tolist()),
                                   model)
    assert whole == pytest.approx(split, rel=1e-12)


def test_loglik_inversion_path_matches_exact():
    model = cb.CbpModel(cb.Poisson(1.3), cb.PoissonLinear(1.05), 10)
    traj = cb.simulate(model, 25, seed=8)
    exact = cb.log_likelihood(traj, model, cb.ExactConvolution())
    inv = cb.log_likelihood(traj, model, cb.PgfInversion())
    assert inv == pytest.approx(exact, abs=1e-9)


def test_loglik_underflow_floors_and_warns():
    # a 1 -> 60 jump under Poisson(1) offspring is deep in the tail
    model = cb.CbpModel(cb.Poisson(1.0), cb.DeterministicControl(), 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        val = cb.log_likelihood(_traj([1, 60, 60]), model,
                                cb.PgfInversion())
    assert val <= math.log(1e-250)
    assert any("floor" in str(w.message) for w in caught)


# --- maximum-likelihood fitting ---


def test_fit_point_mass_concentrates():
    model = cb.CbpModel(cb.Deterministic(2), cb.DeterministicControl(), 1)
    traj = cb.simulate(model, 6, seed=0)
    fam = cb.OffspringSimplexFamily(K=3, control=cb.DeterministicControl(),
                                    z0=1)
    fit = cb.fit_mle(traj, fam, method=cb.ExactConvolution(), n_starts=4)
    assert fit.converged
    assert fit.params["p2"] > 0.999
    assert fit.loglik <= 0.0


def test_fit_recovers_three_point_offspring():
    truth = np.array([0.1538, 0.6491, 0.1971])
    model = cb.CbpModel(cb.FiniteSupport(tuple(truth)),
                        cb.DeterministicControl(), 20)
    fam = cb.OffspringSimplexFamily(K=2, control=cb.DeterministicControl(),
                                    z0=20)
    fits = []
    for s in range(20):
        traj = cb.simulate(model, 70, seed=derive_seed(1000, s))
        if traj.extinct:
            continue
        fit = cb.fit_mle(traj, fam, method=cb.PgfInversion(), n_starts=1)
        fits.append([fit.params[f"p{j}"] for j in range(3)])
    assert len(fits) >= 15
    avg = np.array(fits).mean(axis=0)
    assert (np.abs(avg - truth) < 0.05).all()


def test_fit_nested_family_never_worse():
    model = cb.CbpModel(cb.FiniteSupport((0.1538, 0.6491, 0.1971)),
                        cb.DeterministicControl(), 20)
    traj = cb.simulate(model, 50, seed=derive_seed(1000, 0))
    small = cb.fit_mle(traj, cb.OffspringSimplexFamily(
        K=2, control=cb.DeterministicControl(), z0=20),
        method=cb.PgfInversion(), n_starts=2)
    big = cb.fit_mle(traj, cb.OffspringSimplexFamily(
        K=3, control=cb.DeterministicControl(), z0=20),
        method=cb.PgfInversion(), n_starts=2)
    assert big.loglik >= small.loglik - 1e-6
    # the wider family parks its extra atom well below the real ones
    assert big.params["p3"] < 0.1


def test_fit_poisson_family_recovers_rate():
    model = cb.CbpModel(cb.Poisson(1.05), cb.DeterministicControl(), 30)
    traj = cb.simulate(model, 40, seed=3)
    fit = cb.fit_mle(traj, cb.PoissonOffspringFamily(
        control=cb.DeterministicControl(), z0=30),
        method=cb.PgfInversion(), n_starts=3)
    assert fit.converged
    assert fit.params["lam"] == pytest.approx(1.05, abs=0.08)


def test_fit_start_order_invariance():
    model = cb.CbpModel(cb.FiniteSupport((0.3, 0.4, 0.3)),
                        cb.DeterministicControl(), 10)
    traj = cb.simulate(model, 30, seed=11)
    fam = cb.OffspringSimplexFamily(K=2, control=cb.DeterministicControl(),
                                    z0=10)
    a = cb.fit_mle(traj, fam, method=cb.ExactConvolution(), seed=0,
                   n_starts=5)
    b = cb.fit_mle(traj, fam, method=cb.ExactConvolution(), seed=99,
                   n_starts=5)
    for key in a.params:
        assert a.params[key] == pytest.approx(b.params[key], abs=1e-6)
    assert a.loglik == pytest.approx(b.loglik, abs=1e-8)


def test_fit_json_round_trip(tmp_path):
    model = cb.CbpModel(cb.Poisson(1.2), cb.DeterministicControl(), 10)
    traj = cb.simulate(model, 15, seed=2)
    fit = cb.fit_mle(traj, cb.PoissonOffspringFamily(
        control=cb.DeterministicControl(), z0=10),
        method=cb.PgfInversion(), n_starts=2)
    doc = cb.fit_to_json(fit, seed=2)
    assert doc["schema"] == "cbp-fit/v1"
    assert doc["loglik"] == fit.loglik
    path = str(tmp_path / "fit.json")
    cb.write_fit_json(fit, path, seed=2)
    import json
    back = json.load(open(path))
    assert back == doc
