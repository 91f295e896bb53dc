"""Per-player noise-state filtering objects.

Each player's learning is summarized by a deterministic kernel F giving the
density of the indirect (drift-inferred) component of their estimate of the
primitive shock path.  The unresolved kernel Xtilde (the part of the state's
response to a past shock the player has not yet learned) is recovered
algebraically from (X, F) at every node, and drives both the F evolution and
the conditional state covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import trapezoid_weights
from .model import GameSpec


@dataclass
class FilterState:
    """Filtering state of one player at the current forward node.

    ``F`` holds the current time slice F_t(u, s) on nodes u, s <= t (entries
    beyond t stay zero), stored in matrix layout: row index u * m + a,
    column index s * m + b, so quadrature contractions are plain matrix
    products.  Use :func:`kernel_blocks` for the (u, s, a, b) block view.
    ``Xtilde`` accumulates the full history of the unresolved kernel
    Xtilde_t(u), and ``Sigma_XX`` the conditional state covariance path.
    """

    player: int
    node: int
    F: np.ndarray                    # (N m, N m), valid on [0..node m)^2
    Xtilde: np.ndarray               # (N, N, d, m), rows filled through node
    Sigma_XX: np.ndarray             # (N, d, d), filled through node
    F_history: list = field(default_factory=list)   # optional retained slices


def kernel_blocks(F: np.ndarray, m: int) -> np.ndarray:
    """Reshape a matrix-layout kernel (k m, k m) to blocks (k, k, m, m)."""
    k = F.shape[0] // m
    return F.reshape(k, m, k, m).transpose(0, 2, 1, 3)


def unresolved_kernel(X_row: np.ndarray, F_slice: np.ndarray,
                      Pi: np.ndarray, dt: float) -> np.ndarray:
    """Xtilde_t(u) = X_t(u)(I - Pi) - int_0^t X_t(z) F_t(z, u) dz.

    ``X_row``: (k, d, m) state kernel row at time node t over u = 0..k-1;
    ``F_slice``: (k m, k m) matrix-layout filtering kernel at the same node.
    """
    k, d, m = X_row.shape
    if F_slice.shape != (k * m, k * m):
        raise ValueError("X row and F slice disagree on the time index")
    out = X_row @ (np.eye(m) - Pi)
    w = trapezoid_weights(k, dt)
    wX = (w[:, None, None] * X_row).transpose(1, 0, 2).reshape(d, k * m)
    out -= (wX @ F_slice).reshape(d, k, m).swapaxes(0, 1)
    return out


def state_error_cov(X_row: np.ndarray, Xtilde_row: np.ndarray,
                    dt: float) -> np.ndarray:
    """Sigma^XX(t) = int_0^t X_t(s) Xtilde_t(s)^T ds, symmetrized."""
    if X_row.shape != Xtilde_row.shape:
        raise ValueError("row shape mismatch")
    w = trapezoid_weights(X_row.shape[0], dt)
    wX = w[:, None, None] * X_row
    S = np.tensordot(wX, Xtilde_row, axes=([0, 2], [0, 2]))
    return 0.5 * (S + S.T)


def init_filter(spec: GameSpec, player: int, retain_slices: bool = False) -> FilterState:
    """Filter at t = 0: zero interior, with the diagonal boundary value
    F_0(0, 0) seeded from the initial volatility loading."""
    N, d, m = spec.N, spec.d, spec.m
    F = np.zeros((N * m, N * m))
    X00 = np.zeros((d, m))
    X00[:, :d] = spec.Sigma[0]
    Xt0 = X00 @ (np.eye(m) - spec.projector(player))
    A = Xt0.T @ (spec.Gamma[player][0] @ spec.selector(player))
    F[:m, :m] = A + A.T
    state = FilterState(
        player=player,
        node=0,
        F=F,
        Xtilde=np.zeros((N, N, d, m)),
        Sigma_XX=np.zeros((N, d, d)),
        F_history=[] if not retain_slices else [F[:m, :m].copy()],
    )
    return state


def refresh_node(state: FilterState, spec: GameSpec, X: np.ndarray, k: int):
    """Recompute Xtilde and Sigma^XX at node k from the current (X, F)."""
    Pi = spec.projector(state.player)
    dt = spec.grid.dt
    km = (k + 1) * spec.m
    row = unresolved_kernel(X[k, :k + 1], state.F[:km, :km], Pi, dt)
    state.Xtilde[k, :k + 1] = row
    state.Sigma_XX[k] = state_error_cov(X[k, :k + 1], row, dt)
    state.node = k


def advance_filter(state: FilterState, spec: GameSpec, X: np.ndarray, k: int,
                   retain_slices: bool = False):
    """Advance F from node k to k+1.

    Interior Euler update with the PSD increment Xtilde^T P Xtilde dt, then
    the fresh boundary row/column at the new node, computed from the
    interior-updated slice.  Requires X rows through node k+1 and Xtilde at
    node k (call :func:`refresh_node` first).
    """
    N = spec.N
    if k + 1 >= N:
        raise ValueError("cannot step the filter past the horizon")
    dt = spec.grid.dt
    j = state.player
    P = spec.precision(j)[k]
    Gam = spec.Gamma[j]
    E = spec.selector(j)
    Pi = spec.projector(j)

    m = spec.m
    Xt = state.Xtilde[k, :k + 1]                      # (k+1, d, m)
    km = (k + 1) * m
    M = Xt.transpose(0, 2, 1).reshape(km, -1)         # ((k+1) m, d)
    state.F[:km, :km] += dt * (M @ P @ M.T)

    # boundary at the new node: F_{t}(u, t) = Xtilde_t(u)^T Gamma E plus its
    # mirror, with the corner block carrying both one-sided terms.  Xtilde_t
    # itself reads the fresh column, so the write is repeated once to make
    # the boundary self-consistent (the coupling is O(dt)).
    km2 = (k + 2) * m
    GE = Gam[k + 1] @ E                               # (d, m)
    for _ in range(2):
        row_new = unresolved_kernel(X[k + 1, :k + 2], state.F[:km2, :km2],
                                    Pi, dt)
        col = row_new.transpose(0, 2, 1).reshape(km2, -1) @ GE  # ((k+2) m, m)
        state.F[:km2, km:km2] = col
        state.F[km:km2, :km2] = col.T
        state.F[km:km2, km:km2] += col[km:km2]

    refresh_node(state, spec, X, k + 1)
    if retain_slices:
        state.F_history.append(state.F[:km2, :km2].copy())


def explicit_filter_kernel(state: FilterState, spec: GameSpec,
                           t: int, u: int, s: int) -> np.ndarray:
    """Three-term closed form for F_t(u, s), used as a cross-check against
    the forward-integrated slice."""
    if max(u, s) > t:
        raise ValueError("indices off the causal triangle")
    j = state.player
    dt = spec.grid.dt
    Gam = spec.Gamma[j]
    E = spec.selector(j)
    P = spec.precision(j)
    Xt = state.Xtilde
    val = Xt[s, u].T @ Gam[s] @ E + E.T @ Gam[u] @ Xt[u, s]
    lo = max(u, s)
    if t > lo:
        # int_{max(u,s)}^t Xtilde_r(u)^T P(r) Xtilde_r(s) dr
        w = trapezoid_weights(t - lo + 1, dt)
        rng = np.arange(lo, t + 1)
        PXs = np.einsum("rde,rem->rdm", P[rng], Xt[rng, s])
        val = val + np.einsum("r,rda,rdm->am", w, Xt[rng, u], PXs)
    return val


def noise_cross_cov(state: FilterState, spec: GameSpec, t: int, u: int) -> np.ndarray:
    """Cov(X_t, W_u | F_t^i) = int_0^u Xtilde_t(s) ds, a d x m read-out."""
    if u > t:
        raise ValueError("u must not exceed t")
    w = trapezoid_weights(u + 1, spec.grid.dt)
    return np.einsum("s,sdm->dm", w, state.Xtilde[t, :u + 1])
