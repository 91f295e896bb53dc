"""Scenario construction: parameter validation, mode dispatch, JSON loading."""

import json

import numpy as np
import pytest

from lqgames.model import ScenarioParams, SpecError, build_scenario, load_scenario


def test_default_benchmark_shape():
    spec = build_scenario(ScenarioParams())
    assert spec.n == 2
    assert spec.d == 1
    assert spec.N == 40
    assert spec.grid.T == pytest.approx(1.0)
    # Observation precision p enters the signal loading as sqrt(p).
    assert spec.Gamma[0, 0, 0] == pytest.approx(np.sqrt(3.0))
    assert spec.Gamma[1, 0, 0] == pytest.approx(np.sqrt(3.0))
    # Each player observes through their own noise block.
    assert spec.obs_block == (1, 2)


def test_effort_cost_scaling():
    spec = build_scenario(ScenarioParams(r1=0.1, r2=0.4))
    assert spec.G_DD[1][0, 0, 0] == pytest.approx(4 * spec.G_DD[0][0, 0, 0])


def test_cooperative_mode_shares_target():
    spec = build_scenario(ScenarioParams(mode="private-cooperative"))
    # Cooperative play tracks the common (averaged) target, which is zero
    # for the symmetric +1/-1 pair.
    assert np.allclose(spec.Gbar_X[0], spec.Gbar_X[1])


def test_pooled_mode_shares_signal():
    private = build_scenario(ScenarioParams(p1=3.0, p2=1.0))
    pooled = build_scenario(ScenarioParams(p1=3.0, p2=1.0, mode="pooled-competitive"))
    # Pooling adds the precisions and routes both players through one
    # observation channel.
    assert pooled.Gamma[0, 0, 0] == pytest.approx(np.sqrt(4.0))
    assert pooled.Gamma[1, 0, 0] == pytest.approx(np.sqrt(4.0))
    assert pooled.obs_block[0] == pooled.obs_block[1]
    assert private.obs_block[0] != private.obs_block[1]


def test_single_player_mode():
    spec = build_scenario(ScenarioParams(mode="single-player"))
    assert spec.n == 1


def test_zero_control_gain_mode():
    spec = build_scenario(ScenarioParams(mode="zero-control-gain"))
    for k in range(spec.n):
        assert np.all(spec.B[k] == 0.0)


def test_invalid_params_raise():
    with pytest.raises(SpecError):
        build_scenario(ScenarioParams(p1=-1.0))
    with pytest.raises(SpecError):
        build_scenario(ScenarioParams(r1=0.0))
    with pytest.raises(SpecError):
        build_scenario(ScenarioParams(mode="nonsense"))


def test_load_scenario_roundtrip(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"p1": 2.0, "p2": 5.0, "N": 12, "sigma": 0.5}))
    params, spec = load_scenario(str(path))
    assert params.p1 == 2.0
    assert params.p2 == 5.0
    assert spec.N == 12
    assert spec.Sigma[0, 0, 0] == pytest.approx(0.5)


def test_load_scenario_rejects_unknown_keys(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"precision_one": 2.0}))
    with pytest.raises(SpecError):
        load_scenario(str(path))
