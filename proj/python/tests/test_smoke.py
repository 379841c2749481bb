import json
import math
import pathlib

import pytest

import preddev

SCENARIOS = pathlib.Path(__file__).resolve().parents[2] / "scenarios"


def test_registry():
    names = preddev.models()
    assert "lorenz" in names and "hiv_ifn" in names
    d = preddev.describe("exp_decay")
    assert d["observables"]


def test_observe_exp_decay():
    d = preddev.describe("exp_decay")
    theta = d["default_theta"]
    vals = preddev.observe("exp_decay", theta, {"x0": 1.0}, d["observables"][0], [0.0, 1.0])
    assert len(vals) == 2
    assert vals[0] == pytest.approx(1.0)
    assert vals[1] == pytest.approx(math.exp(-theta[0]), rel=1e-5)


def test_run_linear_fit():
    cfg = json.loads((SCENARIOS / "linear_toy.json").read_text())
    report = preddev.run(cfg, ["fit"])
    assert math.isfinite(report["fit"]["z_star"])


def test_bad_config():
    with pytest.raises(ValueError):
        preddev.run({"name": "x"}, ["fit"])
