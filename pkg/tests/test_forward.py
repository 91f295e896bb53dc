"""Forward closure: mean dynamics, kernel causality, linearity in controls."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lqgames.forward import StrategyProfile, forward_closure
from lqgames.model import ScenarioParams, build_scenario


@pytest.fixture(scope="module")
def spec():
    return build_scenario(ScenarioParams(N=16))


def test_zero_profile_mean_path(spec):
    # With x0 = 0 and no controls the mean path is identically zero.
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    assert np.allclose(env.Xbar, 0.0)


def test_nonzero_x0_decays(spec):
    p = ScenarioParams(N=16, x0=1.0)
    s = build_scenario(p)
    env = forward_closure(s, StrategyProfile.zeros(s))
    a = s.A[0, 0, 0]
    exact = np.exp(a * s.grid.nodes)
    assert np.allclose(env.Xbar[:, 0], exact, atol=5e-3 * max(1.0, abs(a)))


def test_state_kernel_causal(spec):
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    for t in range(spec.N):
        assert np.all(env.X[t, t + 1 :] == 0.0)


def test_state_kernel_birth_is_identity_block(spec):
    # The just-born increment enters the state with unit weight on the
    # fundamental block.
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    E0 = spec.layout.selector(0)
    for t in range(spec.N):
        assert np.allclose(env.X[t, t], E0)


@given(scale=st.floats(-2.0, 2.0, allow_nan=False))
@settings(max_examples=15, deadline=None)
def test_mean_path_linear_in_mean_controls(spec, scale):
    rng = np.random.default_rng(7)
    base = StrategyProfile.zeros(spec)
    base.Dbar[:] = rng.normal(size=base.Dbar.shape)
    scaled = base.copy()
    scaled.Dbar *= scale
    env1 = forward_closure(spec, base)
    env2 = forward_closure(spec, scaled)
    assert np.allclose(env2.Xbar, scale * env1.Xbar, atol=1e-10)


def test_kernel_part_independent_of_mean_controls(spec):
    rng = np.random.default_rng(8)
    a = StrategyProfile.zeros(spec)
    b = StrategyProfile.zeros(spec)
    b.Dbar[:] = rng.normal(size=b.Dbar.shape)
    env_a = forward_closure(spec, a)
    env_b = forward_closure(spec, b)
    # Fluctuation kernels depend only on the feedback kernels, not on the
    # deterministic mean controls.
    assert np.allclose(env_a.X, env_b.X)
    for k in range(spec.n):
        assert np.allclose(env_a.filters[k].Xtilde, env_b.filters[k].Xtilde)


def test_feedback_kernels_shift_fluctuations(spec):
    rng = np.random.default_rng(9)
    a = StrategyProfile.zeros(spec)
    b = StrategyProfile.zeros(spec)
    b.D[:] = 0.05 * rng.normal(size=b.D.shape)
    for k in range(spec.n):
        for t in range(spec.N):
            b.D[k, t, t + 1 :] = 0.0
    env_a = forward_closure(spec, a)
    env_b = forward_closure(spec, b)
    assert not np.allclose(env_a.X, env_b.X)
