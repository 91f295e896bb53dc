"""Shared fixtures: solved scenarios are expensive, so build them once."""

import numpy as np
import pytest

from lqgames import ScenarioParams, build_scenario
from lqgames.equilibrium import picard_solve


@pytest.fixture(scope="session")
def benchmark():
    """Symmetric two-player benchmark (T=1, N=40, p=3, r=0.1) solved to
    equilibrium."""
    spec = build_scenario(ScenarioParams())
    sol = picard_solve(spec)
    assert sol.converged
    return spec, sol


@pytest.fixture(scope="session")
def benchmark_coarse():
    """Same scenario on a coarse grid for brute-force oracles."""
    spec = build_scenario(ScenarioParams(N=10))
    sol = picard_solve(spec)
    assert sol.converged
    return spec, sol


@pytest.fixture(scope="session")
def single_player():
    """One-player partial-information tracking problem."""
    spec = build_scenario(ScenarioParams(mode="single-player"))
    sol = picard_solve(spec)
    assert sol.converged
    return spec, sol


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
