"""Grid, quadrature, causality-mask, and block-layout primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lqgames.core import (
    BlockLayout,
    GridError,
    TimeGrid,
    TriKernel,
    block_project,
    causal_mask,
    enforce_causal,
    make_grid,
    trapezoid_integrate,
    trapezoid_weights,
)


def test_make_grid_basic():
    g = make_grid(1.0, 40)
    assert g.N == 40
    assert g.dt == pytest.approx(1.0 / 39)
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] == pytest.approx(1.0)
    assert np.allclose(np.diff(g.nodes), g.dt)


def test_make_grid_rejects_bad_input():
    with pytest.raises(GridError):
        make_grid(1.0, 1)
    with pytest.raises(GridError):
        make_grid(-1.0, 10)


@given(k=st.integers(min_value=1, max_value=200))
@settings(max_examples=50, deadline=None)
def test_trapezoid_weights_sum_to_interval(k):
    dt = 0.0125
    w = trapezoid_weights(k, dt)
    assert w.shape == (k,)
    # Quadrature over [0, t_k] must integrate constants exactly.
    assert np.sum(w) == pytest.approx((k - 1) * dt)
    if k >= 2:
        assert w[0] == pytest.approx(dt / 2)
        assert w[-1] == pytest.approx(dt / 2)


@given(
    coeffs=st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=3),
)
@settings(max_examples=40, deadline=None)
def test_trapezoid_integrate_exact_for_linear(coeffs):
    # Trapezoid rule is exact on affine integrands.
    g = make_grid(1.0, 33)
    a = coeffs[0]
    b = coeffs[-1]
    samples = a + b * g.nodes
    val = trapezoid_integrate(samples, g.dt)
    assert val == pytest.approx(a + b / 2, abs=1e-12)


def test_causal_mask_lower_triangular():
    M = causal_mask(6)
    assert M.shape == (6, 6)
    assert np.array_equal(M, np.tril(np.ones((6, 6))))


def test_enforce_causal_zeroes_future_columns():
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(5, 5, 2, 3))
    out = enforce_causal(arr.copy())
    for t in range(5):
        assert np.all(out[t, t + 1 :] == 0.0)
        assert np.allclose(out[t, : t + 1], arr[t, : t + 1])


def test_trikernel_storage_and_copy():
    k = TriKernel(4, (2, 3))
    assert k.data.shape == (4, 4, 2, 3)
    k.data[2, 1] = 1.0
    assert np.all(k.value(2, 1) == 1.0)
    # Acausal node pairs read back as exact zeros.
    assert np.all(k.value(1, 2) == 0.0)
    c = k.copy()
    c.data[2, 1] = -1.0
    assert np.all(k.value(2, 1) == 1.0)


def test_block_layout_and_projection():
    # Stacked noise vector: fundamental block 0 plus one observation block
    # per player, each of state dimension d.
    layout = BlockLayout(n=2, d=1)
    assert layout.m == 3
    v = np.array([3.0, -5.0, 7.0])
    assert np.allclose(block_project(v, layout, 0), [3.0, 0.0, 0.0])
    assert np.allclose(block_project(v, layout, 2), [0.0, 0.0, 7.0])
    E1 = layout.selector(1)
    assert np.allclose(E1 @ v, [-5.0])
    assert np.allclose(layout.projector(1), E1.T @ E1)
