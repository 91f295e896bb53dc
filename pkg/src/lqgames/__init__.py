"""Nash equilibria of finite-player continuous-time LQG games in which
players learn about a common state from private signals whose drift is
moved by everyone's controls.

Equilibria are computed without simulation: the forward closure integrates
deterministic impulse-response and filtering kernels, the backward pass
solves costate and belief-adjoint systems (including the information wedge),
and a damped Picard iteration drives the best-response map to a fixed
point.  Brute-force oracles (exact Gaussian conditioning, Monte Carlo
playback, Riccati references) validate every layer independently.
"""

from .core import BlockLayout, GridError, TimeGrid, make_grid
from .model import (GameSpec, ScenarioParams, SpecError, build_scenario,
                    load_scenario, validate_spec)
from .forward import ForwardEnv, StrategyProfile, forward_closure
from .adjoint import AdjointSet, best_response, solve_adjoints
from .equilibrium import (EquilibriumSolution, SolverConfig, kalman_bucy_cov,
                          mean_spike_sensitivity, picard_solve,
                          policy_residual, riccati_single_player)
from .analysis import (CostReport, SweepReport, effort_metrics, expected_cost,
                       full_information_mean_controls, pooling_comparison,
                       precision_sweep)
from .oracle import (PathEnsemble, ProjectionTable, exact_discrete_projection,
                     kernel_projection_map, monte_carlo_cost,
                     simulate_closed_loop)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
