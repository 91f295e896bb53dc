"""Expected-cost evaluation from kernels, and the welfare experiments.

Costs are computed in closed form from the forward environment's second
moments (mean path plus shock-response kernels) — no simulation.  The
welfare experiments are the signal-pooling comparison and the
precision-budget sweep, each a grid of full equilibrium solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import TimeGrid, trapezoid_weights
from .equilibrium import SolverConfig, picard_solve
from .forward import ForwardEnv, StrategyProfile
from .model import GameSpec, ScenarioParams, build_scenario


@dataclass
class CostReport:
    """Expected cost of one player, split into state-tracking terms,
    effort terms, and the additive constant."""

    player: int
    total: float
    tracking: float
    effort: float
    constant: float
    integrand: np.ndarray           # (N,) running-cost path, all terms


def expected_cost(spec: GameSpec, env: ForwardEnv,
                  profile: StrategyProfile, i: int) -> CostReport:
    """Closed-form expected cost of player i under the given environment.

    Quadratic terms use the unconditional second moments implied by the
    shock-response kernels; the effort variance uses the strategies
    re-expressed against primitive shocks.
    """
    if env.profile is not profile and (
            env.profile.Dbar.shape != profile.Dbar.shape
            or not np.array_equal(env.profile.Dbar, profile.Dbar)
            or not np.array_equal(env.profile.D, profile.D)):
        raise ValueError("environment was built from a different profile")
    N, dt = spec.N, spec.grid.dt
    Xbar = env.Xbar
    G = spec.G_XX[i]
    g = spec.Gbar_X[i]
    G_lin_ker = spec.running_linear_kernel(i)

    track = np.zeros(N)
    eff = np.zeros(N)
    for t in range(N):
        w = trapezoid_weights(t + 1, dt)
        Xrow = env.X[t, :t + 1]
        var = np.einsum("s,sdm,sem->de", w, Xrow, Xrow)
        track[t] = (Xbar[t] @ G[t] @ Xbar[t] + np.trace(G[t] @ var)
                    + 2.0 * g[t] @ Xbar[t]
                    + 2.0 * np.einsum("sdm,sdm->", w[:, None, None]
                                      * G_lin_ker[t, :t + 1], Xrow))
        Drow = env.Dcal[i, t, :t + 1]
        dvar = np.einsum("s,sdm,sem->de", w, Drow, Drow)
        Db = profile.Dbar[i, t]
        eff[t] = Db @ spec.G_DD[i][t] @ Db + np.trace(spec.G_DD[i][t] @ dvar)

    const_path = spec.G_const[i]
    w_t = trapezoid_weights(N, dt)
    tracking = float(w_t @ track)
    effort = float(w_t @ eff)
    constant = float(w_t @ const_path)

    # terminal analogues
    w = trapezoid_weights(N, dt)
    Xrow = env.X[N - 1]
    var_T = np.einsum("s,sdm,sem->de", w, Xrow, Xrow)
    GT = spec.G_XX_T[i]
    tracking += float(Xbar[N - 1] @ GT @ Xbar[N - 1] + np.trace(GT @ var_T)
                      + 2.0 * spec.Gbar_X_T[i] @ Xbar[N - 1]
                      + 2.0 * np.einsum("sdm,sdm->", w[:, None, None]
                                        * spec.terminal_linear_kernel(i), Xrow))

    total = tracking + effort + constant
    return CostReport(player=i, total=total, tracking=tracking,
                      effort=effort, constant=constant,
                      integrand=track + eff + const_path)


def effort_metrics(profile: StrategyProfile, grid: TimeGrid) -> dict:
    """Aggregate mean-effort path and per-player control energies."""
    w = trapezoid_weights(grid.N, grid.dt)
    abs_path = np.abs(profile.Dbar).sum(axis=(0, 2))          # (N,)
    energies = np.einsum("t,itd,itd->i", w, profile.Dbar, profile.Dbar)
    return {
        "abs_effort_path": abs_path,
        "total_effort": float(w @ abs_path),
        "energies": energies,
    }


def full_information_mean_controls(spec: GameSpec):
    """Certainty-equivalent benchmark: open-loop Nash mean controls of the
    deterministic mean system under perfect state observation.

    Each player's deterministic cost is quadratic in the stacked open-loop
    controls, so simultaneous stationarity is a direct affine solve;
    returns (Dbar, Xbar).
    """
    n, N, d, dt = spec.n, spec.N, spec.d, spec.grid.dt
    w_full = trapezoid_weights(N, dt)

    def propagate(Dbar_batch):
        Bsz = Dbar_batch.shape[0]
        Xbar = np.zeros((Bsz, N, d))
        Xbar[:, 0] = spec.x0
        for t in range(N - 1):
            drift = Xbar[:, t] @ spec.A[t].T
            for k in range(n):
                drift = drift + Dbar_batch[:, k, t] @ spec.B[k][t].T
            Xbar[:, t + 1] = Xbar[:, t] + dt * drift
        return Xbar

    # State responses to unit-mass control needles (no filter reactions:
    # full information, open-loop Nash).
    dX = np.zeros((n, N * d, N, d))
    for i in range(n):
        for s in range(N - 1):
            dX[i, :, s + 1] = dX[i, :, s] + dt * (dX[i, :, s] @ spec.A[s].T)
            dX[i, s * d:(s + 1) * d, s + 1] += spec.B[i][s].T

    def gradient(Dbar_batch):
        Bsz = Dbar_batch.shape[0]
        Xbar = propagate(Dbar_batch)
        out = np.zeros_like(Dbar_batch)
        c0 = (w_full / dt)[:, None]
        for i in range(n):
            f = np.einsum("sde,bse->bsd", spec.G_XX[i], Xbar) + spec.Gbar_X[i]
            fT = Xbar[:, N - 1] @ spec.G_XX_T[i].T + spec.Gbar_X_T[i]
            wdX = w_full[None, :, None] * dX[i]
            state = np.einsum("qsd,bsd->bq", wdX, f, optimize=True) \
                + np.einsum("qd,bd->bq", dX[i][:, N - 1], fT)
            direct = c0 * np.einsum("tde,bte->btd", spec.G_DD[i],
                                    Dbar_batch[:, i])
            out[:, i] = 2.0 * (direct + state.reshape(Bsz, N, d))
        return out

    dim = n * N * d
    batch = np.zeros((dim + 1, dim))
    batch[1:] = np.eye(dim)
    g = gradient(batch.reshape(dim + 1, n, N, d)).reshape(dim + 1, dim)
    M = (g[1:] - g[0]).T
    Dbar = np.linalg.solve(M, -g[0]).reshape(n, N, d)
    Xbar = propagate(Dbar[None])[0]
    return Dbar, Xbar


@dataclass
class SweepReport:
    """Per-cell equilibrium summaries of a parameter sweep."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _solve_costs(spec: GameSpec, config: SolverConfig):
    sol = picard_solve(spec, config)
    costs = [expected_cost(spec, sol.env, sol.profile, i).total
             for i in range(spec.n)]
    return sol, costs


def pooling_comparison(params: ScenarioParams, p2_grid=None,
                       config: SolverConfig | None = None) -> SweepReport:
    """Private vs pooled equilibrium costs over a grid of player-2
    precisions, for opposing-target and common-target variants."""
    if p2_grid is None:
        p2_grid = [1.0, 2.0, 3.0, 4.0, 5.0]
    if config is None:
        config = SolverConfig()
    report = SweepReport(meta={"p1": params.p1, "p2_grid": list(p2_grid)})
    for p2 in p2_grid:
        for tag in ("competitive", "cooperative"):
            prm_priv = replace(params, p2=p2, mode=f"private-{tag}")
            prm_pool = replace(params, p2=p2, mode=f"pooled-{tag}")
            sol_a, cost_a = _solve_costs(build_scenario(prm_priv), config)
            sol_b, cost_b = _solve_costs(build_scenario(prm_pool), config)
            for i in range(2):
                report.rows.append({
                    "p2": p2,
                    "player": i + 1,
                    "mode": tag,
                    "private_cost": cost_a[i],
                    "pooled_cost": cost_b[i],
                    "gain": cost_a[i] - cost_b[i],
                    "converged": sol_a.converged and sol_b.converged,
                })
    return report


def precision_sweep(budget: float = 20.0, costs=(0.1, 0.1),
                    splits=None, sigma: float = 0.5,
                    base: ScenarioParams | None = None,
                    config: SolverConfig | None = None) -> SweepReport:
    """Equilibrium metrics across allocations of a squared-precision budget
    p1^2 + p2^2 = budget.

    ``splits`` are the player-1 shares of the squared budget in [0, 1].
    Each cell records effort metrics, the wedge maxima, the terminal mean
    state, and the certainty-equivalent benchmark energies.
    """
    if splits is None:
        splits = np.linspace(0.0, 1.0, 9)
    if base is None:
        base = ScenarioParams(sigma=sigma, mode="private-competitive")
    if config is None:
        config = SolverConfig()
    r1, r2 = costs
    report = SweepReport(meta={"budget": budget, "r1": r1, "r2": r2,
                               "sigma": sigma})
    for frac in splits:
        p1 = float(np.sqrt(frac * budget))
        p2 = float(np.sqrt((1.0 - frac) * budget))
        prm = replace(base, p1=p1, p2=p2, r1=r1, r2=r2, sigma=sigma,
                      mode="private-competitive")
        spec = build_scenario(prm)
        sol = picard_solve(spec, config)
        met = effort_metrics(sol.profile, spec.grid)
        ce_Dbar, _ = full_information_mean_controls(spec)
        w = trapezoid_weights(spec.N, spec.grid.dt)
        ce_energy = np.einsum("t,itd,itd->i", w, ce_Dbar, ce_Dbar)
        wedge_max = [float(np.abs(adj.Vbar).max()) for adj in sol.adjoints]
        report.rows.append({
            "split": float(frac),
            "p1": p1,
            "p2": p2,
            "effort_1": float(met["energies"][0]),
            "effort_2": float(met["energies"][1]),
            "total_effort": met["total_effort"],
            "ce_effort_1": float(ce_energy[0]),
            "ce_effort_2": float(ce_energy[1]),
            "mean_state_T": float(sol.env.Xbar[-1, 0]),
            "wedge_max_1": wedge_max[0],
            "wedge_max_2": wedge_max[1],
            "converged": sol.converged,
        })
    return report
