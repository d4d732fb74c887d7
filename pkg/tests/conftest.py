import pathlib

import pytest

import cbplab as cb

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def increment_corpus():
    """Named lattice increments with positive variance, mixed lattices."""
    return [
        ("bernoulli_half", cb.Pmf.from_probs([0.5, 0.5])),
        ("two_point_02", cb.Pmf.from_probs([0.5, 0.0, 0.5])),
        ("uniform_0_4", cb.Pmf.from_probs([0.2] * 5)),
        ("triangle", cb.Pmf.from_probs([0.25, 0.5, 0.25])),
        ("shifted_bernoulli", cb.Pmf.from_probs([0.5, 0.5], offset=1)),
        ("poisson_1", cb.Poisson(1.0).pmf()),
        ("geometric_half", cb.Geometric(0.5).pmf()),
        ("binomial_3_03", cb.Binomial(3, 0.3).pmf()),
    ]


@pytest.fixture(scope="session")
def enum_models():
    """Fully finite models: every transition law is an exact finite sum."""
    chi = cb.Pmf.from_probs([0.5, 0.5])
    return [
        cb.CbpModel(cb.FiniteSupport((0.5, 0.5)),
                    cb.DeterministicControl(), 1),
        cb.CbpModel(cb.FiniteSupport((0.1538, 0.6491, 0.1971)),
                    cb.DeterministicControl(), 20),
        cb.CbpModel(cb.FiniteSupport((0.3, 0.4, 0.3)),
                    cb.ScaledDeterministic(2.0), 5),
        cb.CbpModel(cb.FiniteSupport((0.25, 0.5, 0.25)),
                    cb.IidSumControl(chi), 4),
        cb.CbpModel(cb.Binomial(2, 0.5), cb.BinomialLinear(1, 0.5), 3),
        cb.CbpModel(cb.Deterministic(2), cb.BinomialLinear(2, 0.25), 2),
    ]


@pytest.fixture(scope="session")
def cross_models(enum_models):
    """Corpus for cross-method transition-law comparisons."""
    return enum_models + [
        cb.CbpModel(cb.Poisson(1.0), cb.PoissonLinear(1.05), 100),
        cb.CbpModel(cb.Poisson(2.0), cb.DeterministicControl(), 1),
        cb.CbpModel(cb.Geometric(0.5), cb.DeterministicControl(), 1),
        cb.CbpModel(cb.Deterministic(1), cb.PoissonDrift(1.0, 0.25), 16),
    ]
