"""Regenerate every shipped fixture under data/.

Deterministic: model descriptors are pure serialization, the demo series
uses a pinned seed. Run from the repository root:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import pathlib

from cbplab import (CbpModel, Deterministic, DeterministicControl,
                    FiniteSupport, Poisson, PoissonDrift, PoissonLinear,
                    simulate, write_trajectory_csv)

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

DEMO_SEED = 20260816

MODELS = {
    # three-point offspring law on {0,1,2}, identity control
    "three_point": CbpModel(
        FiniteSupport((0.1538, 0.6491, 0.1971)), DeterministicControl(), 20),
    # the same law embedded in {0,1,2,3} with an empty top atom
    "three_point_padded": CbpModel(
        FiniteSupport((0.1538, 0.6491, 0.1971, 0.0)),
        DeterministicControl(), 20),
    # a different four-point law with the same mean and variance
    "four_point": CbpModel(
        FiniteSupport((0.0891, 0.8432, 0.003, 0.0647)),
        DeterministicControl(), 20),
    # supercritical growth with a noisy linear control
    "growth_linear": CbpModel(Poisson(1.0), PoissonLinear(1.05), 100),
    # equal-moment uncontrolled pair for decay scans
    "bgwp_poisson2": CbpModel(Poisson(2.0), DeterministicControl(), 1),
    "bgwp_uniform04": CbpModel(
        FiniteSupport((0.2, 0.2, 0.2, 0.2, 0.2)), DeterministicControl(), 1),
    # same compound law reached through offspring vs through control
    "control_witness": CbpModel(Deterministic(1), PoissonLinear(2.0), 1),
    # sublinear drift pair: the drift coefficient is the target parameter
    "drift_none_q25": CbpModel(Deterministic(1), PoissonDrift(0.0, 0.25), 16),
    "drift_unit_q25": CbpModel(Deterministic(1), PoissonDrift(1.0, 0.25), 16),
    "drift_unit_q75": CbpModel(Deterministic(1), PoissonDrift(1.0, 0.75),
                               10000),
}


def main() -> None:
    models_dir = DATA / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    for name, model in MODELS.items():
        path = models_dir / f"{name}.json"
        path.write_text(json.dumps(model.to_json(), indent=2) + "\n")
        print("wrote", path.relative_to(ROOT))

    demo = simulate(MODELS["three_point"], 70, DEMO_SEED,
                    record_progenitors=True)
    out = DATA / "demo_series.csv"
    write_trajectory_csv(demo, str(out))
    print("wrote", out.relative_to(ROOT), "final size", int(demo.sizes[-1]))


if __name__ == "__main__":
    main()
