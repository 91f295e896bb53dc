"""Forward closure: mean path, shock-response kernel, and per-player filters.

Given a strategy profile (mean action paths plus causal noise-feedback
kernels on each player's own estimate of the primitive shocks), integrate the
coupled system of the state mean, the state's impulse-response kernel X_t(u),
and every player's filtering kernel, in one forward sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import trapezoid_weights
from .filtering import FilterState, init_filter, refresh_node, advance_filter
from .model import GameSpec


@dataclass
class StrategyProfile:
    """Open-loop-in-information strategies for all players.

    ``Dbar``: (n, N, d) mean action paths.
    ``D``: (n, N, N, d, m) causal kernels; player k's action at node t is
    Dbar[k, t] + int_0^t D[k, t, u] dWhat^k_u where dWhat^k is that player's
    estimate of the primitive shock increments.
    """

    Dbar: np.ndarray
    D: np.ndarray

    @classmethod
    def zeros(cls, spec: GameSpec) -> "StrategyProfile":
        return cls(Dbar=np.zeros((spec.n, spec.N, spec.d)),
                   D=np.zeros((spec.n, spec.N, spec.N, spec.d, spec.m)))

    def copy(self) -> "StrategyProfile":
        return StrategyProfile(self.Dbar.copy(), self.D.copy())


@dataclass
class ForwardEnv:
    """Everything the backward pass and the cost functional need.

    ``X``: (N, N, d, m) state shock-response kernel, X[t, u] = X_t(u).
    ``Xbar``: (N, d) state mean.
    ``Dcal``: (n, N, N, d, m) strategies re-expressed against the *primitive*
    shocks (estimate kernels folded through each player's filter).
    ``filters``: per-player :class:`FilterState` at the horizon.
    """

    spec: GameSpec
    profile: StrategyProfile
    Xbar: np.ndarray
    X: np.ndarray
    Dcal: np.ndarray
    filters: list


def primitive_noise_control(spec: GameSpec, profile: StrategyProfile,
                            filt: FilterState, t: int) -> np.ndarray:
    """Player's kernel against primitive shocks at node t:

    Dcal^k_t(s) = D^k_t(s) Pi^k + int_0^t D^k_t(u) F^k_t(u, s) du
    (the filter maps primitive increments into estimated ones).
    """
    k = filt.player
    dt = spec.grid.dt
    Pi = spec.projector(k)
    row = profile.D[k, t, :t + 1]                     # (t+1, d, m)
    out = row @ Pi
    w = trapezoid_weights(t + 1, dt)
    m = spec.m
    km = (t + 1) * m
    wD = (w[:, None, None] * row).transpose(1, 0, 2).reshape(-1, km)
    out += (wD @ filt.F[:km, :km]).reshape(-1, t + 1, m).swapaxes(0, 1)
    return out


def forward_closure(spec: GameSpec, profile: StrategyProfile,
                    retain_filter_slices: bool = False) -> ForwardEnv:
    """One forward sweep of the coupled mean/kernel/filter system.

    Node order at each step k -> k+1: refresh unresolved kernels, form the
    primitive-shock controls, Euler-advance the mean and every kernel column,
    seed the new diagonal X(t, t) with the volatility loading, then advance
    each filter (interior increment, fresh boundary).
    """
    N, d, m, n = spec.N, spec.d, spec.m, spec.n
    dt = spec.grid.dt

    Xbar = np.zeros((N, d))
    X = np.zeros((N, N, d, m))
    Dcal = np.zeros((n, N, N, d, m))

    Xbar[0] = spec.x0
    X[0, 0, :, :d] = spec.Sigma[0]                    # volatility in block 0
    filters = [init_filter(spec, k, retain_filter_slices) for k in range(n)]
    for k in range(n):
        refresh_node(filters[k], spec, X, 0)

    for t in range(N - 1):
        for k in range(n):
            Dcal[k, t, :t + 1] = primitive_noise_control(
                spec, profile, filters[k], t)

        drift_bar = spec.A[t] @ Xbar[t]
        drift_X = np.matmul(spec.A[t], X[t, :t + 1])
        for k in range(n):
            drift_bar = drift_bar + spec.B[k][t] @ profile.Dbar[k, t]
            drift_X = drift_X + np.matmul(spec.B[k][t], Dcal[k, t, :t + 1])
        Xbar[t + 1] = Xbar[t] + dt * drift_bar
        X[t + 1, :t + 1] = X[t, :t + 1] + dt * drift_X
        X[t + 1, t + 1, :, :d] = spec.Sigma[t + 1]

        for k in range(n):
            advance_filter(filters[k], spec, X, t,
                           retain_slices=retain_filter_slices)

    for k in range(n):
        Dcal[k, N - 1, :N] = primitive_noise_control(
            spec, profile, filters[k], N - 1)

    return ForwardEnv(spec=spec, profile=profile, Xbar=Xbar, X=X,
                      Dcal=Dcal, filters=filters)
