"""Backward costate / belief-adjoint systems and the best-response map.

For a fixed player against a frozen forward environment, integrate backward
the physical costate and, per opponent, the belief adjoints that price
shifting that opponent's estimate of each past shock.  The opponent sum of
the filtered belief adjoints is the information wedge.  Mean and kernel
subsystems decouple; the kernel subsystem is batched over the shock node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import trapezoid_weights
from .forward import ForwardEnv
from .model import GameSpec


@dataclass
class AdjointSet:
    """Solved backward system for one player.

    ``Hbar_X``: (N, d) mean costate.  ``Hbar_k``: opponent -> (N, N, m) mean
    belief adjoints (axis 1 is the shock node).  ``H_X``: (N, N, d, m)
    costate response kernel, zero for r > t.  ``H_k``: opponent ->
    (N, N, N, m, m) belief-adjoint kernels indexed (t, u, r).  ``Vbar``:
    (N, d) mean wedge; ``V_kernel``: (N, N, d, m) wedge kernel.
    """

    player: int
    Hbar_X: np.ndarray
    Hbar_k: dict
    H_X: np.ndarray
    H_k: dict
    Vbar: np.ndarray
    V_kernel: np.ndarray


def _mean_wedge_terms(spec: GameSpec, env: ForwardEnv, i: int,
                      Hbar_k: dict, t: int):
    """Per-opponent filtered belief adjoints at node t and their sum.

    Returns (wedge, inner) with wedge the d-vector
    sum_k P^k(t) int Xtilde^k_t(z) Hbar^k_t(z) dz and inner[k] the raw
    integral before the precision weighting (reused in the self-coupling).
    """
    dt = spec.grid.dt
    w = trapezoid_weights(t + 1, dt)
    wedge = np.zeros(spec.d)
    inner = {}
    for k in range(spec.n):
        if k == i:
            continue
        Xt = env.filters[k].Xtilde[t, :t + 1]          # (t+1, d, m)
        v = np.tensordot(w[:, None] * Hbar_k[k][t, :t + 1], Xt,
                         axes=([0, 1], [0, 2]))
        inner[k] = v
        wedge += spec.precision(k)[t] @ v
    return wedge, inner


def backward_mean_adjoints(spec: GameSpec, env: ForwardEnv, i: int):
    """Backward Euler sweep of the mean costate and mean belief adjoints.

    Returns (Hbar_X, Hbar_k, Vbar); the wedge path Vbar is recorded at every
    node with the same quadrature used inside the sweep.
    """
    N, d, n = spec.N, spec.d, spec.n
    dt = spec.grid.dt
    G_XX = spec.G_XX[i]
    Gbar_X = spec.Gbar_X[i]

    Hbar_X = np.zeros((N, d))
    Hbar_k = {k: np.zeros((N, N, spec.m)) for k in range(n) if k != i}
    Vbar = np.zeros((N, d))

    Hbar_X[N - 1] = spec.G_XX_T[i] @ env.Xbar[N - 1] + spec.Gbar_X_T[i]

    for t in range(N - 2, -1, -1):
        s = t + 1
        wedge, inner = _mean_wedge_terms(spec, env, i, Hbar_k, s)
        Vbar[s] = wedge
        rhs_X = -(G_XX[s] @ env.Xbar[s] + Gbar_X[s]) \
            - spec.A[s].T @ Hbar_X[s] - wedge
        Hbar_X[t] = Hbar_X[s] - dt * rhs_X
        for k in Hbar_k:
            BD = np.matmul(spec.B[k][s], env.profile.D[k, s, :s + 1])
            Pv = spec.precision(k)[s] @ inner[k]
            rhs_k = -np.tensordot(BD, Hbar_X[s], axes=([1], [0])) \
                + np.tensordot(env.X[s, :s + 1], Pv, axes=([1], [0]))
            Hbar_k[k][t, :s + 1] = Hbar_k[k][s, :s + 1] - dt * rhs_k
    Vbar[0], _ = _mean_wedge_terms(spec, env, i, Hbar_k, 0)
    return Hbar_X, Hbar_k, Vbar


def backward_kernel_adjoints(spec: GameSpec, env: ForwardEnv, i: int):
    """Backward sweep of the costate/belief-adjoint response kernels.

    The shock node r is a pure batch axis (the r-subsystems are
    independent), so all of them are advanced in one sweep.  Returns
    (H_X, H_k, V_kernel) with H_X zeroed on r > t.
    """
    N, d, m, n = spec.N, spec.d, spec.m, spec.n
    dt = spec.grid.dt
    G_XX = spec.G_XX[i]
    G_X = spec.running_linear_kernel(i)                 # (N, N, d, m)

    H_X = np.zeros((N, N, d, m))
    H_k = {k: np.zeros((N, N, N, m, m)) for k in range(n) if k != i}
    V_kernel = np.zeros((N, N, d, m))

    H_X[N - 1] = np.matmul(spec.G_XX_T[i], env.X[N - 1]) \
        + spec.terminal_linear_kernel(i)

    for t in range(N - 2, -1, -1):
        s = t + 1
        w = trapezoid_weights(s + 1, dt)
        wedge = np.zeros((N, d, m))
        inner = {}
        for k in H_k:
            Xt = env.filters[k].Xtilde[s, :s + 1]       # (s+1, d, m)
            wX = w[:, None, None] * Xt
            v = np.tensordot(wX, H_k[k][s, :s + 1],
                             axes=([0, 2], [0, 2])).swapaxes(0, 1)
            inner[k] = v
            wedge += np.matmul(spec.precision(k)[s], v)
        V_kernel[s] = wedge

        rhs_X = -(np.matmul(G_XX[s], env.X[s]) + G_X[s]) \
            - np.matmul(spec.A[s].T, H_X[s]) - wedge
        H_X[t] = H_X[s] - dt * rhs_X

        for k in H_k:
            BD = np.matmul(spec.B[k][s], env.profile.D[k, s, :s + 1])
            Pv = np.matmul(spec.precision(k)[s], inner[k])
            rhs_k = -np.tensordot(BD, H_X[s],
                                  axes=([1], [1])).transpose(0, 2, 1, 3) \
                + np.tensordot(env.X[s, :s + 1], Pv,
                               axes=([1], [1])).transpose(0, 2, 1, 3)
            H_k[k][t, :s + 1] = H_k[k][s, :s + 1] - dt * rhs_k

    mask = np.arange(N)[:, None] < np.arange(N)[None, :]    # r > t
    H_X[mask] = 0.0
    V_kernel[mask] = 0.0
    return H_X, H_k, V_kernel


def kernel_costate(spec: GameSpec, env: ForwardEnv, i: int) -> np.ndarray:
    """Costate response kernel H_X only, with the belief-adjoint kernels
    kept as a rolling slice instead of a full (t, u, r) history.

    Same recursion as :func:`backward_kernel_adjoints`; used in the solver
    hot loop where the history is not needed.
    """
    N, d, m, n = spec.N, spec.d, spec.m, spec.n
    dt = spec.grid.dt
    G_XX = spec.G_XX[i]
    G_X = spec.running_linear_kernel(i)

    H_X = np.zeros((N, N, d, m))
    # rolling belief-adjoint kernels in matrix layout (u m + a, r m + c)
    Hk_cur = {k: np.zeros((N * m, N * m)) for k in range(n) if k != i}

    H_X[N - 1] = np.matmul(spec.G_XX_T[i], env.X[N - 1]) \
        + spec.terminal_linear_kernel(i)

    for t in range(N - 2, -1, -1):
        s = t + 1
        w = trapezoid_weights(s + 1, dt)
        sm = (s + 1) * m
        wedge_mat = np.zeros((d, N * m))
        inner = {}
        for k in Hk_cur:
            Xt = env.filters[k].Xtilde[s, :s + 1]
            wX = (w[:, None, None] * Xt).transpose(1, 0, 2).reshape(d, sm)
            v = wX @ Hk_cur[k][:sm]                  # (d, N m)
            inner[k] = v
            wedge_mat += spec.precision(k)[s] @ v
        wedge = wedge_mat.reshape(d, N, m).swapaxes(0, 1)

        rhs_X = -(np.matmul(G_XX[s], env.X[s]) + G_X[s]) \
            - np.matmul(spec.A[s].T, H_X[s]) - wedge
        H_X[t] = H_X[s] - dt * rhs_X

        HXm = H_X[s].transpose(1, 0, 2).reshape(d, N * m)
        for k in Hk_cur:
            BD = np.matmul(spec.B[k][s], env.profile.D[k, s, :s + 1])
            BDm = BD.transpose(0, 2, 1).reshape(sm, d)
            Xm = env.X[s, :s + 1].transpose(0, 2, 1).reshape(sm, d)
            Pv = spec.precision(k)[s] @ inner[k]     # (d, N m)
            Hk_cur[k][:sm] -= dt * (-BDm @ HXm + Xm @ Pv)

    mask = np.arange(N)[:, None] < np.arange(N)[None, :]
    H_X[mask] = 0.0
    return H_X


def solve_adjoints(spec: GameSpec, env: ForwardEnv, i: int) -> AdjointSet:
    Hbar_X, Hbar_k, Vbar = backward_mean_adjoints(spec, env, i)
    H_X, H_k, V_kernel = backward_kernel_adjoints(spec, env, i)
    return AdjointSet(player=i, Hbar_X=Hbar_X, Hbar_k=Hbar_k, H_X=H_X,
                      H_k=H_k, Vbar=Vbar, V_kernel=V_kernel)


def kernel_best_response(spec: GameSpec, env: ForwardEnv, i: int) -> np.ndarray:
    """First-order condition applied to the costate response kernel alone."""
    H_X = kernel_costate(spec, env, i)
    GB = np.linalg.inv(spec.G_DD[i]) @ np.swapaxes(spec.B[i], -1, -2)
    return -np.matmul(GB[:, None], H_X)


def best_response(spec: GameSpec, adj: AdjointSet, i: int):
    """First-order condition: Dbar = -G_DD^{-1} B^T Hbar_X and the same map
    applied to the costate response kernel."""
    GB = np.linalg.inv(spec.G_DD[i]) @ np.swapaxes(spec.B[i], -1, -2)
    Dbar = -np.matmul(GB, adj.Hbar_X[..., None])[..., 0]
    D = -np.matmul(GB[:, None], adj.H_X)
    return Dbar, D
