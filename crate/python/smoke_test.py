"""Smoke test for the ddsde extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import math
import pathlib
import tempfile

import ddsde

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    assert "landau" in ddsde.list_models()

    mu = ddsde.Measure([[0.0], [1.0]])
    nu = ddsde.Measure([[0.0], [3.0]])
    assert abs(mu.wasserstein(nu, method="exact") - math.sqrt(2.0)) < 1e-12
    assert abs(ddsde.wasserstein([[1.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]]) - 1.0) < 1e-12

    landau = ddsde.Model.landau(0.0, 1.0, 1.0)
    drift = landau.drift([1.0, 0.0, 0.0], ddsde.Measure([[0.0, 0.0, 0.0]]))
    assert drift == [-2.0, 0.0, 0.0], drift
    assert landau.flags()["invertible_sigma"] is False
    assert ddsde.contraction_exponent_cc(1.0, 1.0) == 8.0

    model = ddsde.Model.linear(2.0, 1.0, [[1.0]])
    res = ddsde.simulate(model, [[1.0]] * 512, 1.0, 1e-3, seed=3)
    mean = res["mean"][-1][0]
    assert abs(mean - math.exp(-1.0)) < 0.1, mean

    pic = ddsde.picard(model, [[1.0]] * 256, 0.5, 1e-2, seed=4)
    assert pic["converged"], pic["deltas"]

    ou = ddsde.Model.linear(1.0, 0.25, [[1.0]])
    check = ddsde.log_harnack(ou, {"kind": "two_plus_sin"}, [[0.0]] * 2000, [[1.0]] * 2000, 1.0, 1e-2, seed=5, law_particles=500)
    assert not check["violated"], check

    ibp = ddsde.integration_by_parts(ou, {"kind": "linear", "u": [1.5]}, [1.0], [[0.0]] * 100, 1.0, 1e-2, seed=6, n_paths=5000, law_particles=500)
    assert ibp["lhs_exact"] == 1.5 and abs(ibp["z_score"]) < 4.0, ibp

    p = ddsde.phi(0.5, 2.0, 1.2, 1.0, 0.5)
    assert abs(p - 34.25975962836382) < 1e-10, p

    with tempfile.TemporaryDirectory() as out:
        report = ddsde.run_config(str(ROOT / "configs" / "smoke" / "couple.json"), threads=2, output_dir=out)
        assert report["experiment"] == "couple"
        assert (pathlib.Path(out) / "couple.csv").exists()

    try:
        ddsde.Model.landau(2.0, 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("gamma outside [0, 1] accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
