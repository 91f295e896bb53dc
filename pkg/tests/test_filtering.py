"""Filtering kernels: closed-form covariance check, contraction, PSD."""

import numpy as np
import pytest

from lqgames.core import trapezoid_weights
from lqgames.forward import StrategyProfile, forward_closure
from lqgames.model import ScenarioParams, build_scenario


def _zero_control_env(N):
    spec = build_scenario(ScenarioParams(N=N, mode="zero-control-gain"))
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    return spec, env


def test_error_covariance_matches_closed_form():
    # With no control feedback, unit volatility, and precision p, the
    # stationary filtering error variance is tanh(sqrt(p) t) / sqrt(p).
    spec, env = _zero_control_env(160)
    t = spec.grid.nodes
    g = np.sqrt(3.0)
    exact = np.tanh(g * t) / g
    got = env.filters[0].Sigma_XX[:, 0, 0]
    rel = np.max(np.abs(got[1:] - exact[1:]) / exact[1:])
    assert rel < 0.02


def test_error_covariance_first_order_convergence():
    g = np.sqrt(3.0)

    def err(N):
        spec, env = _zero_control_env(N)
        t = spec.grid.nodes
        exact = np.tanh(g * t) / g
        got = env.filters[0].Sigma_XX[:, 0, 0]
        return np.max(np.abs(got[1:] - exact[1:]) / exact[1:])

    e80, e160 = err(80), err(160)
    assert e160 < 0.75 * e80  # roughly halves with the step


def test_estimate_kernel_is_a_contraction():
    # Conditioning cannot add energy: the unresolved-noise row norm is
    # bounded by the raw impulse-response row norm at every node (strictly
    # over past increments, excluding the just-born one).
    spec = build_scenario(ScenarioParams(N=40))
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    for k in range(spec.n):
        for t in range(1, spec.N):
            xt = np.linalg.norm(env.filters[k].Xtilde[t, :t])
            xx = np.linalg.norm(env.X[t, :t])
            assert xt <= xx + 1e-12


def test_error_covariance_psd_and_monotone_start():
    spec, env = _zero_control_env(80)
    sig = env.filters[0].Sigma_XX[:, 0, 0]
    assert sig[0] == pytest.approx(0.0)
    assert np.all(sig >= -1e-12)
    # Variance grows from zero before saturating.
    assert np.all(np.diff(sig) > -1e-10)


def test_filters_symmetric_across_players():
    # Equal precisions give identical error covariances for both players.
    spec = build_scenario(ScenarioParams(N=40))
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    assert np.allclose(
        env.filters[0].Sigma_XX, env.filters[1].Sigma_XX, atol=1e-12
    )


def test_own_noise_block_fully_resolved_never():
    # A player never conditions on the fundamental noise directly: the
    # unresolved kernel keeps a nonzero fundamental component.
    spec = build_scenario(ScenarioParams(N=40))
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    filt = env.filters[0]
    t = spec.N - 1
    assert np.linalg.norm(filt.Xtilde[t, : t + 1]) > 0.0
