"""Brute-force validators, independent of the kernel machinery.

Two oracles: an exact discrete-time joint-Gaussian conditioning of shock
increments on a player's observation history (closing the loop recursively
with exact projections, no filtering kernels), and an Euler--Maruyama
closed-loop Monte Carlo simulator whose noise-state estimates are maintained
by the innovations-gain recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import trapezoid_weights
from .forward import StrategyProfile, forward_closure
from .model import GameSpec


@dataclass
class ProjectionTable:
    """Exact conditioning maps for one player at one time node.

    ``from_obs`` maps stacked observation increments (centered) to the
    conditional means of the stacked shock increments; ``projection`` is the
    induced idempotent map on the shock increments themselves.
    """

    player: int
    node: int
    from_obs: np.ndarray            # (k m, k d)
    projection: np.ndarray          # (k m, k m)


def _closed_loop_coefficients(spec: GameSpec, profile: StrategyProfile,
                              node: int):
    """Exact linear coefficients of the discretized closed loop.

    Walks the loop forward keeping the state's exact loading on every past
    shock increment; each player's actions contract their policy kernel
    against exact conditional means obtained by Gaussian projection at every
    node.  Returns per-player observation coefficient stacks and the
    per-player projection at ``node``.
    """
    n, d, m, dt = spec.n, spec.d, spec.m, spec.grid.dt
    E0 = spec.layout.selector(0)
    coef = np.zeros((node + 1, node, d, m))     # state loading, [j, s]
    obs = {k: np.zeros((node, node, d, m)) for k in range(n)}   # [q, s]
    proj = {}

    def player_projection(k: int, j: int) -> np.ndarray:
        """Projection of stacked shocks on player k's first j observations."""
        if j == 0:
            return np.zeros((0, 0))
        A = obs[k][:j, :j].transpose(0, 2, 1, 3).reshape(j * d, j * m)
        Gm = A @ A.T
        return A.T @ np.linalg.solve(Gm, A)

    for j in range(node):
        # actions: Dbar plus policy kernel against exact conditional means
        act_coef = np.zeros((n, j, d, m))
        if j:
            for k in range(n):
                R = player_projection(k, j).reshape(j, m, j, m)
                act_coef[k] = np.einsum("udm,umsc->sdc",
                                        profile.D[k, j, :j], R)
        # observation increments at node j
        for k in range(n):
            Ek = spec.selector(k)
            obs[k][j, :j] = dt * np.einsum("de,sem->sdm",
                                           spec.Gamma[k][j], coef[j, :j])
            obs[k][j, j] = Ek
        # state update
        grow = np.einsum("de,sem->sdm", spec.A[j], coef[j, :j])
        for k in range(n):
            grow = grow + np.einsum("de,sem->sdm", spec.B[k][j], act_coef[k])
        coef[j + 1, :j] = coef[j, :j] + dt * grow
        coef[j + 1, j] = spec.Sigma[j] @ E0

    for k in range(n):
        proj[k] = player_projection(k, node)
    return obs, proj


def exact_discrete_projection(spec: GameSpec, profile: StrategyProfile,
                              i: int, node: int) -> ProjectionTable:
    """Exact Gaussian conditioning of shock increments 0..node-1 on player
    i's observation increments over the same window, under the discretized
    closed loop.  Dense O((node*m)^3); intended for coarse grids."""
    if not 0 < node < spec.N:
        raise ValueError("conditioning node off the grid interior")
    n, d, m = spec.n, spec.d, spec.m
    obs, proj = _closed_loop_coefficients(spec, profile, node)
    A = obs[i].transpose(0, 2, 1, 3).reshape(node * d, node * m)
    Gm = A @ A.T
    from_obs = A.T @ np.linalg.inv(Gm)
    return ProjectionTable(player=i, node=node, from_obs=from_obs,
                           projection=proj[i])


def kernel_projection_map(spec: GameSpec, profile: StrategyProfile,
                          i: int, node: int) -> np.ndarray:
    """The filtering-kernel counterpart of the exact projection: the map
    Pi delta_{us} + dt F_node(u, s) on shock increments u, s < node."""
    env = forward_closure(spec, profile, retain_filter_slices=True)
    m = spec.m
    F = env.filters[i].F_history[node]          # ((node+1) m, (node+1) m)
    Pi = spec.projector(i)
    K = spec.grid.dt * F[:node * m, :node * m].copy()
    for u in range(node):
        K[u * m:(u + 1) * m, u * m:(u + 1) * m] += Pi
    return K


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class PathEnsemble:
    """Simulated closed-loop ensemble; everything indexed path-major."""

    M: int
    seed: int
    dW: np.ndarray                  # (M, N-1, m)
    states: np.ndarray              # (M, N, d)
    actions: np.ndarray             # (n, M, N, d)
    obs: np.ndarray                 # (n, M, N-1, d)
    hat_states: np.ndarray          # (n, M, N, d)


def _draw_increments(spec: GameSpec, M: int, seed: int) -> np.ndarray:
    """Counter-based draws keyed by (seed, path) so path order and chunking
    never change the ensemble."""
    N, m = spec.N, spec.m
    sd = np.sqrt(spec.grid.dt)
    out = np.empty((M, N - 1, m))
    for p in range(M):
        bitgen = np.random.Philox(key=np.array([seed, p], dtype=np.uint64))
        out[p] = sd * np.random.Generator(bitgen).standard_normal((N - 1, m))
    return out


def simulate_closed_loop(spec: GameSpec, solution, M: int,
                         seed: int = 0, anticipated=None) -> PathEnsemble:
    """Euler--Maruyama playback of an equilibrium profile.

    Each player's noise-state estimates follow the innovations-gain
    recursion: a fresh increment estimate is seeded from the current
    innovation, and all past estimates pick up the unresolved-kernel gain
    times the innovation.  Actions contract the policy kernel against the
    player's own estimates.

    ``anticipated`` optionally overrides the mean state path each player
    centers their innovations on (shape (n, N, d), default the profile's
    mean state for everyone).  Deviation experiments use it to give the
    deviating player the mean path they can predict, so that only
    opponents' beliefs shift.
    """
    if M <= 0:
        raise ValueError("need a positive path count")
    n, N, d, m, dt = spec.n, spec.N, spec.d, spec.m, spec.grid.dt
    profile = solution.profile
    env = solution.env
    if anticipated is None:
        anticipated = np.broadcast_to(env.Xbar, (n, N, d))
    E0 = spec.layout.selector(0)

    dW = _draw_increments(spec, M, seed)
    x = np.zeros((M, N, d))
    x[:, 0] = spec.x0
    acts = np.zeros((n, M, N, d))
    obs = np.zeros((n, M, N - 1, d))
    hats = np.zeros((n, M, N, d))
    hatDW = np.zeros((n, M, N - 1, m))

    for j in range(N - 1):
        for k in range(n):
            acts[k, :, j] = profile.Dbar[k, j] + np.einsum(
                "udm,pum->pd", profile.D[k, j, :j], hatDW[k, :, :j])
        drift = x[:, j] @ spec.A[j].T
        for k in range(n):
            drift = drift + acts[k, :, j] @ spec.B[k][j].T
        x[:, j + 1] = x[:, j] + dt * drift + dW[:, j] @ (spec.Sigma[j] @ E0).T

        for k in range(n):
            xhat = anticipated[k][j] + np.einsum("udm,pum->pd", env.X[j, :j],
                                                 hatDW[k, :, :j])
            hats[k, :, j] = xhat
            dY = dt * (x[:, j] @ spec.Gamma[k][j].T) \
                + dW[:, j] @ spec.selector(k).T
            obs[k, :, j] = dY
            dI = dY - dt * (xhat @ spec.Gamma[k][j].T)
            gain = np.einsum("udm,de->uem", env.filters[k].Xtilde[j, :j],
                             spec.Gamma[k][j])        # Xtilde^T Gamma per u
            hatDW[k, :, :j] += dt * np.einsum("uem,pe->pum", gain, dI)
            hatDW[k, :, j] = dI @ spec.selector(k)

    j = N - 1
    for k in range(n):
        acts[k, :, j] = profile.Dbar[k, j] + np.einsum(
            "udm,pum->pd", profile.D[k, j, :j], hatDW[k, :, :j])
        hats[k, :, j] = anticipated[k][j] + np.einsum(
            "udm,pum->pd", env.X[j, :j], hatDW[k, :, :j])
    return PathEnsemble(M=M, seed=seed, dW=dW, states=x, actions=acts,
                        obs=obs, hat_states=hats)


def monte_carlo_cost(ensemble: PathEnsemble, spec: GameSpec, i: int):
    """Sample mean and standard error of player i's realized cost."""
    N = spec.N
    w = trapezoid_weights(N, spec.grid.dt)
    x = ensemble.states
    a = ensemble.actions[i]
    run = np.einsum("ptd,tde,pte->pt", x, spec.G_XX[i], x) \
        + 2.0 * np.einsum("td,ptd->pt", spec.Gbar_X[i], x) \
        + spec.G_const[i][None, :] \
        + np.einsum("ptd,tde,pte->pt", a, spec.G_DD[i], a)
    cost = run @ w
    xT = x[:, N - 1]
    cost += np.einsum("pd,de,pe->p", xT, spec.G_XX_T[i], xT) \
        + 2.0 * xT @ spec.Gbar_X_T[i]
    est = float(cost.mean())
    stderr = float(cost.std(ddof=1) / np.sqrt(ensemble.M)) if ensemble.M > 1 else 0.0
    return est, stderr
