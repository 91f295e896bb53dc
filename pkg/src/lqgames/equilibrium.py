"""Best-response Picard iteration and independent reference solvers.

The fixed-point loop composes the forward closure with each player's
backward adjoint solve and first-order condition.  The residual is the
fixed-point gap ``T(profile) - profile`` in an L-infinity metric over mean
and kernel parts; damping relaxes the update without moving fixed points.

Reference solvers (single-player Riccati, Kalman--Bucy covariance, forward
first-variation sensitivity) are deliberately independent of the kernel
machinery so they can serve as cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .adjoint import (AdjointSet, best_response, kernel_best_response,
                      solve_adjoints)
from .core import trapezoid_weights
from .forward import ForwardEnv, StrategyProfile, forward_closure
from .model import GameSpec


@dataclass
class SolverConfig:
    tol: float = 1e-5
    max_iter: int = 200
    damping: float = 1.0
    norm: str = "linf"
    auto_damp: bool = True
    damping_floor: float = 0.125
    scheme: str = "split"
    accel: str = "anderson"
    anderson_depth: int = 5

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.scheme not in ("split", "joint"):
            raise ValueError("scheme must be 'split' or 'joint'")
        if self.accel not in ("anderson", "none"):
            raise ValueError("accel must be 'anderson' or 'none'")


@dataclass
class EquilibriumSolution:
    profile: StrategyProfile
    env: ForwardEnv
    adjoints: list
    residual_history: list
    converged: bool
    iterations: int


def policy_residual(a: StrategyProfile, b: StrategyProfile) -> float:
    """Max over players of sup_t |dDbar|_2 + sup_{t,u} |dD(t,u)|_F."""
    if a.Dbar.shape != b.Dbar.shape or a.D.shape != b.D.shape:
        raise ValueError("profiles live on different grids")
    dbar = np.linalg.norm(a.Dbar - b.Dbar, axis=-1).max(axis=1)
    dker = np.linalg.norm(a.D - b.D, axis=(-2, -1)).max(axis=(1, 2))
    return float((dbar + dker).max())


def _best_response_map(spec: GameSpec, profile: StrategyProfile):
    """One application of the best-response operator; returns the new
    profile together with the environment and adjoints of the input."""
    env = forward_closure(spec, profile)
    new = StrategyProfile.zeros(spec)
    adjoints = []
    for i in range(spec.n):
        adj = solve_adjoints(spec, env, i)
        _, D = best_response(spec, adj, i)
        new.D[i] = D
        adjoints.append(adj)
    new.Dbar[:] = _mean_best_response(spec, env, profile.Dbar)
    return new, env, adjoints


class _Anderson:
    """Windowed Anderson mixing for a fixed-point map x -> g(x).

    Deterministic: mixing weights come from a least-squares solve over the
    stored residual differences.  Falls back to the plain iterate when the
    window is empty.
    """

    def __init__(self, depth: int):
        self.depth = depth
        self.xs: list = []
        self.gs: list = []

    def step(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.xs.append(x)
        self.gs.append(g)
        if len(self.xs) > self.depth + 1:
            self.xs.pop(0)
            self.gs.pop(0)
        k = len(self.xs) - 1
        f = g - x
        if k == 0:
            return g
        dF = np.stack([(self.gs[j + 1] - self.xs[j + 1])
                       - (self.gs[j] - self.xs[j]) for j in range(k)], axis=1)
        dG = np.stack([self.gs[j + 1] - self.gs[j] for j in range(k)], axis=1)
        gamma, *_ = np.linalg.lstsq(dF, f, rcond=None)
        return g - dG @ gamma

    def reset(self):
        self.xs.clear()
        self.gs.clear()


def _kernel_residual(Da: np.ndarray, Db: np.ndarray) -> float:
    return float(np.linalg.norm(Da - Db, axis=(-2, -1)).max(axis=(1, 2)).max())


def _solve_kernels(spec: GameSpec, config: SolverConfig):
    """Phase 1: fixed point of the noise-feedback kernels alone.

    The kernel subsystem never reads the mean paths or the cost targets, so
    it is iterated first, on its own residual.  Returns (D, env, history,
    converged, iterations) with env the closure of the converged kernels
    (zero means).
    """
    n = spec.n
    D = np.zeros((n, spec.N, spec.N, spec.d, spec.m))
    omega = config.damping
    accel = _Anderson(config.anderson_depth) if config.accel == "anderson" else None
    history: list = []
    env = None
    best_res = np.inf
    best_D = D
    stall = 0

    for it in range(1, config.max_iter + 1):
        profile = StrategyProfile(Dbar=np.zeros((n, spec.N, spec.d)), D=D)
        env = forward_closure(spec, profile)
        D_new = np.stack([kernel_best_response(spec, env, i)
                          for i in range(n)])
        res = _kernel_residual(D_new, D)
        history.append(res)
        if res <= config.tol:
            return D, env, history, True, it
        if res < best_res:
            best_res, best_D, stall = res, D, 0
        else:
            stall += 1
        if accel is not None and stall > 2 * config.anderson_depth:
            # Acceleration has stopped making progress: restart from the
            # best iterate and fall back to safeguarded damped iteration.
            accel = None
            D = best_D
            stall = 0
            continue
        if accel is not None:
            D = accel.step(D.ravel(), D_new.ravel()).reshape(D.shape)
        else:
            if (config.auto_damp and len(history) > 1
                    and res > history[-2] and omega > config.damping_floor):
                omega = max(0.5 * omega, config.damping_floor)
            D = (1 - omega) * D + omega * D_new
    return D, env, history, False, config.max_iter


def _mean_influence_bundle(spec: GameSpec, env: ForwardEnv, i: int) -> np.ndarray:
    """State responses to unit-mass action needles by player i at every node.

    A needle of unit mass at node t0 in direction a perturbs the state by
    B_i(t0) e_a one step later; opponents' filters react to the unannounced
    deviation through the same innovations recursion the path simulator
    uses: gain updates on past increment estimates plus seeding of the
    newly born increment from the current innovation shift.  Returns
    (N d, N, d) with batch index t0 * d + a.
    """
    n, N, d, m = spec.n, spec.N, spec.d, spec.m
    dt = spec.grid.dt
    Bsz = N * d
    dX = np.zeros((Bsz, N, d))
    dw = {k: np.zeros((Bsz, N, m)) for k in range(n) if k != i}
    for s in range(N - 1):
        drift = dX[:, s] @ spec.A[s].T
        for k in dw:
            react = np.einsum("udm,bum->bd",
                              env.profile.D[k, s, :s], dw[k][:, :s],
                              optimize=True)
            drift += react @ spec.B[k][s].T
        dX[:, s + 1] = dX[:, s] + dt * drift
        dX[s * d:(s + 1) * d, s + 1] += spec.B[i][s].T
        for k in dw:
            xhat = np.einsum("udm,bum->bd", env.X[s, :s], dw[k][:, :s],
                             optimize=True)
            dI = dt * ((dX[:, s] - xhat) @ spec.Gamma[k][s].T)
            gain = np.einsum("udm,de->uem",
                             env.filters[k].Xtilde[s, :s], spec.Gamma[k][s])
            dw[k][:, :s] += dt * np.einsum("uem,be->bum", gain, dI)
            dw[k][:, s] = dI @ spec.selector(k)
    return dX


def _mean_gradient(spec: GameSpec, bundles: dict,
                   Dbar_batch: np.ndarray) -> np.ndarray:
    """Discrete cost gradients along players' own mean action paths.

    ``bundles[i]`` are the needle influence responses of player i; only
    players present in the dict are evaluated.  Affine in the batched mean
    profiles (B, n, N, d); entry (b, i, t0, a) is the directional
    derivative of player i's cost for a unit-mass needle at (t0, a).
    """
    Bsz, n, N, d = Dbar_batch.shape
    dt = spec.grid.dt
    w_full = trapezoid_weights(N, dt)
    Xbar = np.zeros((Bsz, N, d))
    Xbar[:, 0] = spec.x0
    for t in range(N - 1):
        drift = Xbar[:, t] @ spec.A[t].T
        for k in range(n):
            drift = drift + Dbar_batch[:, k, t] @ spec.B[k][t].T
        Xbar[:, t + 1] = Xbar[:, t] + dt * drift

    out = np.zeros_like(Dbar_batch)
    c0 = (w_full / dt)[:, None]
    for i, bundle in bundles.items():
        f = np.einsum("sde,bse->bsd", spec.G_XX[i], Xbar) + spec.Gbar_X[i]
        fT = Xbar[:, N - 1] @ spec.G_XX_T[i].T + spec.Gbar_X_T[i]
        wdX = w_full[None, :, None] * bundle
        state = np.einsum("qsd,bsd->bq", wdX, f, optimize=True) \
            + np.einsum("qd,bd->bq", bundle[:, N - 1], fT)
        direct = c0 * np.einsum("tde,bte->btd", spec.G_DD[i],
                                Dbar_batch[:, i])
        out[:, i] = 2.0 * (direct + state.reshape(Bsz, N, d))
    return out


def _mean_best_response(spec: GameSpec, env: ForwardEnv,
                        Dbar: np.ndarray) -> np.ndarray:
    """Exact discrete mean best response: for each player, the unique
    minimizer of their quadratic cost in their own mean path, holding the
    other players' mean paths and all kernel objects fixed."""
    n, N, d = spec.n, spec.N, spec.d
    dim = N * d
    out = np.empty_like(Dbar)
    for i in range(n):
        bundle = _mean_influence_bundle(spec, env, i)
        batch = np.repeat(Dbar[None], dim + 1, axis=0)
        batch[1:, i] += np.eye(dim).reshape(dim, N, d)
        g = _mean_gradient(spec, {i: bundle}, batch)
        gi = g[:, i].reshape(dim + 1, dim)
        M = (gi[1:] - gi[0]).T
        out[i] = Dbar[i] + np.linalg.solve(M, -gi[0]).reshape(N, d)
    return out


def _solve_means(spec: GameSpec, env: ForwardEnv) -> np.ndarray:
    """Phase 2: exact mean equilibrium given frozen kernel objects.

    Each player's discrete cost is quadratic in the mean action paths, so
    simultaneous stationarity (every player's own-path gradient zero, with
    opponents' filter reactions priced in) is an affine root problem:
    evaluate the gradient map on a basis, assemble, and solve.
    """
    n, N, d = spec.n, spec.N, spec.d
    dim = n * N * d
    bundles = {i: _mean_influence_bundle(spec, env, i) for i in range(n)}
    batch = np.zeros((dim + 1, dim))
    batch[1:] = np.eye(dim)
    g = _mean_gradient(spec, bundles, batch.reshape(dim + 1, n, N, d))
    flat = g.reshape(dim + 1, dim)
    M = (flat[1:] - flat[0]).T
    Dbar = np.linalg.solve(M, -flat[0])
    return Dbar.reshape(n, N, d)


def _picard_joint(spec: GameSpec, config: SolverConfig) -> EquilibriumSolution:
    """Damped Picard iteration of the joint best-response map from zero.

    With ``auto_damp`` the relaxation factor halves whenever the fixed-point
    residual increases.  Non-convergence is reported, not raised.
    """
    profile = StrategyProfile.zeros(spec)
    omega = config.damping
    history = []
    env = None
    adjoints = []

    for it in range(1, config.max_iter + 1):
        target, env, adjoints = _best_response_map(spec, profile)
        res = policy_residual(target, profile)
        history.append(res)
        if res <= config.tol:
            return EquilibriumSolution(profile=profile, env=env,
                                       adjoints=adjoints,
                                       residual_history=history,
                                       converged=True, iterations=it)
        if (config.auto_damp and len(history) > 1
                and res > history[-2] and omega > config.damping_floor):
            omega = max(0.5 * omega, config.damping_floor)
        profile = StrategyProfile(
            Dbar=(1 - omega) * profile.Dbar + omega * target.Dbar,
            D=(1 - omega) * profile.D + omega * target.D)

    target, env, adjoints = _best_response_map(spec, profile)
    history.append(policy_residual(target, profile))
    return EquilibriumSolution(profile=profile, env=env, adjoints=adjoints,
                               residual_history=history,
                               converged=history[-1] <= config.tol,
                               iterations=config.max_iter)


def picard_solve(spec: GameSpec, config: SolverConfig | None = None) -> EquilibriumSolution:
    """Solve for the equilibrium strategy profile from the zero profile.

    Default scheme exploits the triangular structure of the best-response
    map: the kernel subsystem (which never sees means or targets) is
    iterated to tolerance first, then the mean subsystem — affine given the
    kernels — is solved directly.  The reported final residual is the
    fixed-point gap of the full joint map at the returned profile.

    ``scheme='joint'`` falls back to damped Picard on the joint map.
    Non-convergence is reported through ``converged``, not raised.
    """
    if config is None:
        config = SolverConfig()
    if config.scheme == "joint":
        return _picard_joint(spec, config)

    D, env, history, kconv, kiters = _solve_kernels(spec, config)
    Dbar = _solve_means(spec, env)
    profile = StrategyProfile(Dbar=Dbar, D=D)
    target, env, adjoints = _best_response_map(spec, profile)
    final_res = policy_residual(target, profile)
    history.append(final_res)
    return EquilibriumSolution(profile=profile, env=env, adjoints=adjoints,
                               residual_history=history,
                               converged=kconv and final_res <= config.tol,
                               iterations=kiters + 1)


# ---------------------------------------------------------------------------
# reference solvers


def _interp_coeff(path: np.ndarray, grid, t: float) -> np.ndarray:
    """Piecewise-linear read-out of a per-node coefficient path."""
    x = np.clip(t / grid.dt, 0, path.shape[0] - 1)
    k = int(np.floor(x))
    k1 = min(k + 1, path.shape[0] - 1)
    a = x - k
    return (1 - a) * path[k] + a * path[k1]


def riccati_single_player(spec: GameSpec):
    """Control Riccati pair (S, s) for the n = 1 problem, solved on a fine
    adaptive grid and evaluated at the nodes."""
    if spec.n != 1:
        raise ValueError("Riccati reference requires a single player")
    d = spec.d
    grid = spec.grid
    G_DD_inv = np.linalg.inv(spec.G_DD[0])

    def gains(t):
        A = _interp_coeff(spec.A, grid, t)
        B = _interp_coeff(spec.B[0], grid, t)
        Gi = _interp_coeff(G_DD_inv, grid, t)
        return A, B @ Gi @ B.T

    def rhs_S(t, y):
        S = y.reshape(d, d)
        A, BRB = gains(t)
        Q = _interp_coeff(spec.G_XX[0], grid, t)
        dS = -(Q + A.T @ S + S @ A - S @ BRB @ S)
        return dS.ravel()

    sol_S = solve_ivp(rhs_S, (grid.T, 0.0), spec.G_XX_T[0].ravel(),
                      t_eval=grid.nodes[::-1], rtol=1e-10, atol=1e-12,
                      dense_output=True)
    S_path = sol_S.y.T[::-1].reshape(spec.N, d, d)

    def rhs_s(t, y):
        A, BRB = gains(t)
        S = sol_S.sol(t).reshape(d, d)
        g = _interp_coeff(spec.Gbar_X[0], grid, t)
        return -(g + (A - BRB @ S).T @ y)

    sol_s = solve_ivp(rhs_s, (grid.T, 0.0), spec.Gbar_X_T[0],
                      t_eval=grid.nodes[::-1], rtol=1e-10, atol=1e-12)
    s_path = sol_s.y.T[::-1]
    return S_path, s_path


def kalman_bucy_cov(spec: GameSpec, player: int = 0) -> np.ndarray:
    """Classical filtering error covariance for one player's signal, as the
    exogenous-state reference for the kernel-based covariance."""
    d = spec.d
    grid = spec.grid
    P = spec.precision(player)

    def rhs(t, y):
        S = y.reshape(d, d)
        A = _interp_coeff(spec.A, grid, t)
        vol = _interp_coeff(spec.Sigma, grid, t)
        Pt = _interp_coeff(P, grid, t)
        dS = A @ S + S @ A.T + vol @ vol.T - S @ Pt @ S
        return dS.ravel()

    sol = solve_ivp(rhs, (0.0, grid.T), np.zeros(d * d),
                    t_eval=grid.nodes, rtol=1e-10, atol=1e-12)
    return sol.y.T.reshape(spec.N, d, d)


def mean_spike_sensitivity(spec: GameSpec, solution: EquilibriumSolution,
                           i: int, t0: int, direction=None) -> float:
    """Directional derivative of player i's cost under a unit-mass action
    needle at node t0, computed by forward propagation of the mean
    first-variation system (opponents' filters and kernels frozen).

    The needle carries unit mass on the grid — a bump of height 1/dt over
    one step — so the state picks up B_i(t0) v one node later and the
    effort term contributes with the node's quadrature weight rescaled by
    dt.  At a converged equilibrium this vanishes up to solver tolerance;
    away from one it measures the gradient along the needle direction.
    """
    env = solution.env
    N, d, dt = spec.N, spec.d, spec.grid.dt
    if not 0 <= t0 < N:
        raise ValueError("spike node off the grid")
    v = np.ones(d) if direction is None else np.asarray(direction, float)

    dX = np.zeros((N, d))
    dw = {k: np.zeros((N, spec.m)) for k in range(spec.n) if k != i}

    for s in range(t0, N - 1):
        drift_X = spec.A[s] @ dX[s]
        for k in dw:
            react = np.einsum("udm,um->d",
                              env.profile.D[k, s, :s], dw[k][:s])
            drift_X += spec.B[k][s] @ react
        dX[s + 1] = dX[s] + dt * drift_X
        if s == t0:
            dX[s + 1] += spec.B[i][t0] @ v
        for k in dw:
            xhat = np.einsum("udm,um->d", env.X[s, :s], dw[k][:s])
            dI = dt * (spec.Gamma[k][s] @ (dX[s] - xhat))
            gain = np.einsum("udm,de->uem",
                             env.filters[k].Xtilde[s, :s], spec.Gamma[k][s])
            dw[k][:s] += dt * np.einsum("uem,e->um", gain, dI)
            dw[k][s] = spec.selector(k).T @ dI

    force = np.einsum("tde,te->td", spec.G_XX[i], env.Xbar) + spec.Gbar_X[i]
    w_full = trapezoid_weights(N, dt)               # cost-functional quadrature
    running = np.einsum("t,td,td->", w_full[t0:], dX[t0:], force[t0:])
    terminal = dX[N - 1] @ (spec.G_XX_T[i] @ env.Xbar[N - 1]
                            + spec.Gbar_X_T[i])
    direct = (w_full[t0] / dt) * (v @ spec.G_DD[i][t0]
                                  @ solution.profile.Dbar[i, t0])
    return float(2.0 * (direct + running + terminal))


def mean_deviation_response(spec: GameSpec, solution: EquilibriumSolution,
                            i: int, eta: np.ndarray):
    """Deterministic first-variation response to a mean-path deviation.

    Player i shifts their mean action path by eta (N, d); opponents' filters
    react to the unannounced deviation through the innovations recursion
    (gain updates on past increment estimates plus seeding of the newly
    born increment), while the deviator's own beliefs are unaffected.
    Returns (dX, dw) with dX the state shift and dw the opponents'
    increment-estimate shifts.
    """
    env = solution.env
    N, d, dt = spec.N, spec.d, spec.grid.dt
    eta = np.asarray(eta, float).reshape(N, d)

    dX = np.zeros((N, d))
    dw = {k: np.zeros((N, spec.m)) for k in range(spec.n) if k != i}
    for s in range(N - 1):
        drift_X = spec.A[s] @ dX[s] + spec.B[i][s] @ eta[s]
        for k in dw:
            react = np.einsum("udm,um->d",
                              env.profile.D[k, s, :s], dw[k][:s])
            drift_X += spec.B[k][s] @ react
        dX[s + 1] = dX[s] + dt * drift_X
        for k in dw:
            xhat = np.einsum("udm,um->d", env.X[s, :s], dw[k][:s])
            dI = dt * (spec.Gamma[k][s] @ (dX[s] - xhat))
            gain = np.einsum("udm,de->uem",
                             env.filters[k].Xtilde[s, :s], spec.Gamma[k][s])
            dw[k][:s] += dt * np.einsum("uem,e->um", gain, dI)
            dw[k][s] = spec.selector(k).T @ dI
    return dX, dw


def mean_deviation_cost_change(spec: GameSpec, solution: EquilibriumSolution,
                               i: int, eta: np.ndarray) -> float:
    """Exact change in player i's analytic cost when their mean action path
    is shifted by eta (N, d), holding every other strategy and all kernel
    objects fixed.  Opponents' filters react to the unannounced deviation.

    The cost is quadratic in the deviation, so the change splits into a
    linear term (zero at equilibrium) and a quadratic term; both are
    computed from the propagated mean first-variation system.
    """
    env = solution.env
    N, d, dt = spec.N, spec.d, spec.grid.dt
    eta = np.asarray(eta, float).reshape(N, d)
    dX, _ = mean_deviation_response(spec, solution, i, eta)

    w_full = trapezoid_weights(N, dt)
    force = np.einsum("tde,te->td", spec.G_XX[i], env.Xbar) + spec.Gbar_X[i]
    lin = np.einsum("t,td,td->", w_full, dX, force)
    lin += dX[N - 1] @ (spec.G_XX_T[i] @ env.Xbar[N - 1] + spec.Gbar_X_T[i])
    lin += np.einsum("t,td,tde,te->", w_full, eta, spec.G_DD[i],
                     solution.profile.Dbar[i])
    quad = np.einsum("t,td,tde,te->", w_full, dX, spec.G_XX[i], dX)
    quad += dX[N - 1] @ spec.G_XX_T[i] @ dX[N - 1]
    quad += np.einsum("t,td,tde,te->", w_full, eta, spec.G_DD[i], eta)
    return float(2.0 * lin + quad)
