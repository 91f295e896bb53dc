"""Shared numerical infrastructure: time grids, noise-block layout, causal
two-time kernels, and the trapezoid quadrature used by every integral in the
solver (forward and backward passes share the rule so discretization errors
are consistent)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Invalid time-grid parameters."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of N nodes on [0, T] including both endpoints."""

    T: float
    N: int
    dt: float = field(init=False)
    nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.N < 2:
            raise GridError(f"grid needs at least 2 nodes, got N={self.N}")
        if self.T <= 0:
            raise GridError(f"horizon must be positive, got T={self.T}")
        object.__setattr__(self, "dt", self.T / (self.N - 1))
        nodes = np.linspace(0.0, self.T, self.N)
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)


def make_grid(T: float, N: int) -> TimeGrid:
    return TimeGrid(T=float(T), N=int(N))


@dataclass(frozen=True)
class BlockLayout:
    """Layout of the stacked primitive noise vector W = (W^0, ..., W^n).

    Block 0 is the fundamental noise; block i is player i's observation
    noise.  Each block has the state dimension d, so m = (n + 1) * d.
    """

    n: int
    d: int

    @property
    def m(self) -> int:
        return (self.n + 1) * self.d

    def block_slice(self, i: int) -> slice:
        if not 0 <= i <= self.n:
            raise IndexError(f"block index {i} out of range 0..{self.n}")
        return slice(i * self.d, (i + 1) * self.d)

    def selector(self, i: int) -> np.ndarray:
        """E_i, the d x m matrix extracting block i."""
        E = np.zeros((self.d, self.m))
        E[:, self.block_slice(i)] = np.eye(self.d)
        return E

    def projector(self, i: int) -> np.ndarray:
        """Pi_i = E_i^T E_i, the m x m projector onto block i."""
        P = np.zeros((self.m, self.m))
        s = self.block_slice(i)
        P[s, s] = np.eye(self.d)
        return P


def block_project(v: np.ndarray, layout: BlockLayout, i: int) -> np.ndarray:
    """Zero all noise blocks of ``v`` except block ``i``.

    ``v`` is an m-vector or any array whose last axis has length m.
    """
    if v.shape[-1] != layout.m:
        raise ValueError(f"last axis must have length m={layout.m}")
    out = np.zeros_like(v)
    s = layout.block_slice(i)
    out[..., s] = v[..., s]
    return out


_TRAPZ_CACHE: dict[tuple[int, float], np.ndarray] = {}


def trapezoid_weights(k: int, dt: float) -> np.ndarray:
    """Composite trapezoid weights for nodes 0..k-1 at spacing dt.

    A single sample integrates to zero (degenerate interval).  Returned
    arrays are cached and read-only; copy before mutating.
    """
    if k < 1:
        raise ValueError("need at least one sample")
    key = (k, dt)
    w = _TRAPZ_CACHE.get(key)
    if w is None:
        if k == 1:
            w = np.zeros(1)
        else:
            w = np.full(k, dt)
            w[0] = w[-1] = 0.5 * dt
        w.flags.writeable = False
        _TRAPZ_CACHE[key] = w
    return w


def trapezoid_integrate(samples, dt: float) -> np.ndarray | float:
    """Composite trapezoid rule over consecutive uniformly spaced samples."""
    arr = np.asarray(samples, dtype=float)
    if arr.shape[0] < 1:
        raise ValueError("empty sample sequence")
    w = trapezoid_weights(arr.shape[0], dt)
    return np.tensordot(w, arr, axes=(0, 0))


class TriKernel:
    """Causal two-time kernel K(t_a, t_b), stored at node pairs with b <= a.

    Entries off the causal triangle read back as exact zeros.  Backed by a
    dense (N, N, rows, cols) array whose upper triangle is never written.
    """

    def __init__(self, N: int, shape: tuple[int, int], data: np.ndarray | None = None):
        self.N = N
        self.shape = shape
        if data is None:
            data = np.zeros((N, N) + shape)
        if data.shape != (N, N) + shape:
            raise ValueError("data shape mismatch")
        self.data = data

    def value(self, a: int, b: int) -> np.ndarray:
        if b > a:
            return np.zeros(self.shape)
        return self.data[a, b]

    def copy(self) -> "TriKernel":
        return TriKernel(self.N, self.shape, self.data.copy())


def causal_mask(N: int) -> np.ndarray:
    """Boolean (N, N) mask of the causal triangle b <= a."""
    idx = np.arange(N)
    return idx[None, :] <= idx[:, None]


def enforce_causal(arr: np.ndarray) -> np.ndarray:
    """Zero entries with second time index after the first, in place."""
    N = arr.shape[0]
    mask = ~causal_mask(N)
    arr[mask] = 0.0
    return arr
