"""Game specification: primitives of the n-player LQG game with private
diffusion signals, spec validation, and builders for the two-player tracking
benchmark, its pooled-signal variant, and the single-player reduction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .core import BlockLayout, TimeGrid, make_grid


class SpecError(ValueError):
    """A game specification violates a structural assumption."""


MODES = (
    "private-competitive",
    "private-cooperative",
    "pooled-competitive",
    "pooled-cooperative",
    "single-player",
    "zero-control-gain",
)


@dataclass
class GameSpec:
    """All primitives of the game, sampled at the grid nodes.

    Per-node coefficient paths have leading axis N; per-player paths have
    leading axes (n, N).  ``obs_block`` maps each player to the noise block
    their observation channel loads on (block i+1 by default; pooled
    scenarios point several players at the same block).
    """

    grid: TimeGrid
    layout: BlockLayout
    x0: np.ndarray                  # (d,)
    A: np.ndarray                   # (N, d, d) drift
    Sigma: np.ndarray               # (N, d, d) fundamental volatility, block 0
    Gamma: np.ndarray               # (n, N, d, d) observation gains
    B: np.ndarray                   # (n, N, d, d) control gains
    G_XX: np.ndarray                # (n, N, d, d) running state weight
    Gbar_X: np.ndarray              # (n, N, d) linear state cost mean
    G_const: np.ndarray             # (n, N) running constants
    G_DD: np.ndarray                # (n, N, d, d) effort weight
    G_XX_T: np.ndarray              # (n, d, d) terminal state weight
    Gbar_X_T: np.ndarray            # (n, d) terminal linear cost mean
    obs_block: tuple[int, ...] = ()
    G_X_kernel: np.ndarray | None = None    # (n, N, N, d, m) or None for zero
    G_X_T_kernel: np.ndarray | None = None  # (n, N, d, m) or None for zero

    def __post_init__(self):
        if not self.obs_block:
            self.obs_block = tuple(range(1, self.layout.n + 1))
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def d(self) -> int:
        return self.layout.d

    @property
    def m(self) -> int:
        return self.layout.m

    @property
    def N(self) -> int:
        return self.grid.N

    def selector(self, i: int) -> np.ndarray:
        """E^i for player i's observation noise block."""
        key = ("sel", i)
        if key not in self._cache:
            self._cache[key] = self.layout.selector(self.obs_block[i])
        return self._cache[key]

    def projector(self, i: int) -> np.ndarray:
        """Pi^i for player i's observation noise block."""
        key = ("proj", i)
        if key not in self._cache:
            self._cache[key] = self.layout.projector(self.obs_block[i])
        return self._cache[key]

    def precision(self, i: int) -> np.ndarray:
        """P^i(t) = Gamma^i(t)^T Gamma^i(t), shape (N, d, d)."""
        key = ("prec", i)
        if key not in self._cache:
            G = self.Gamma[i]
            self._cache[key] = np.einsum("tij,tik->tjk", G, G)
        return self._cache[key]

    def running_linear_kernel(self, i: int) -> np.ndarray:
        if self.G_X_kernel is None:
            return np.zeros((self.N, self.N, self.d, self.m))
        return self.G_X_kernel[i]

    def terminal_linear_kernel(self, i: int) -> np.ndarray:
        if self.G_X_T_kernel is None:
            return np.zeros((self.N, self.d, self.m))
        return self.G_X_T_kernel[i]


def _check_sym_psd(M: np.ndarray, name: str, strict: bool = False):
    if not np.allclose(M, np.swapaxes(M, -1, -2), atol=1e-12):
        raise SpecError(f"{name} is not symmetric")
    eig = np.linalg.eigvalsh(M)
    if strict:
        if eig.min() <= 0:
            raise SpecError(f"{name} must be positive definite "
                            f"(min eigenvalue {eig.min():.3e})")
    elif eig.min() < -1e-12:
        raise SpecError(f"{name} must be positive semidefinite "
                        f"(min eigenvalue {eig.min():.3e})")


def validate_spec(spec: GameSpec) -> GameSpec:
    """Check all structural invariants; return the spec unchanged if valid."""
    n, d, N = spec.n, spec.d, spec.N
    if spec.layout.m != (n + 1) * d:
        raise SpecError("layout m != (n+1) d")
    paths = {
        "A": (spec.A, (N, d, d)),
        "Sigma": (spec.Sigma, (N, d, d)),
        "Gamma": (spec.Gamma, (n, N, d, d)),
        "B": (spec.B, (n, N, d, d)),
        "G_XX": (spec.G_XX, (n, N, d, d)),
        "Gbar_X": (spec.Gbar_X, (n, N, d)),
        "G_const": (spec.G_const, (n, N)),
        "G_DD": (spec.G_DD, (n, N, d, d)),
        "G_XX_T": (spec.G_XX_T, (n, d, d)),
        "Gbar_X_T": (spec.Gbar_X_T, (n, d)),
    }
    for name, (arr, shape) in paths.items():
        if arr.shape != shape:
            raise SpecError(f"{name} has shape {arr.shape}, expected {shape}")
    if spec.x0.shape != (d,):
        raise SpecError(f"x0 has shape {spec.x0.shape}, expected ({d},)")
    for b in spec.obs_block:
        if not 1 <= b <= n:
            raise SpecError(f"observation block {b} out of range 1..{n}")
    _check_sym_psd(spec.G_XX, "G_XX")
    _check_sym_psd(spec.G_XX_T, "terminal G_XX")
    _check_sym_psd(spec.G_DD, "G_DD", strict=True)
    return spec


@dataclass
class ScenarioParams:
    """Parameters of the tracking-game experiments."""

    p1: float = 3.0
    p2: float = 3.0
    r1: float = 0.1
    r2: float = 0.1
    targets: tuple[float, float] = (1.0, -1.0)
    x0: float = 0.0
    T: float = 1.0
    N: int = 40
    sigma: float = 1.0
    mode: str = "private-competitive"

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"unknown mode {self.mode!r}")
        if self.p1 < 0 or self.p2 < 0:
            raise SpecError("signal precisions must be nonnegative")
        if self.r1 <= 0 or self.r2 <= 0:
            raise SpecError("effort weights must be positive")


def _tracking_spec(params: ScenarioParams, n: int, precisions, efforts,
                   targets, obs_block=None) -> GameSpec:
    """Scalar tracking game: dX = sum_i D^i dt + sigma dW^0, cost
    (X - a_i)^2 + r_i (D^i)^2 expanded into the quadratic primitives."""
    grid = make_grid(params.T, params.N)
    layout = BlockLayout(n=n, d=1)
    N = grid.N
    ones = np.ones((N, 1, 1))
    spec = GameSpec(
        grid=grid,
        layout=layout,
        x0=np.array([params.x0]),
        A=np.zeros((N, 1, 1)),
        Sigma=params.sigma * ones,
        Gamma=np.stack([np.sqrt(p) * ones for p in precisions]),
        B=np.stack([ones.copy() for _ in range(n)]),
        G_XX=np.stack([ones.copy() for _ in range(n)]),
        Gbar_X=np.stack([-a * np.ones((N, 1)) for a in targets]),
        G_const=np.stack([a ** 2 * np.ones(N) for a in targets]),
        G_DD=np.stack([r * ones for r in efforts]),
        G_XX_T=np.zeros((n, 1, 1)),
        Gbar_X_T=np.zeros((n, 1)),
        obs_block=tuple(obs_block) if obs_block else (),
    )
    return validate_spec(spec)


def build_two_player_tracking(params: ScenarioParams) -> GameSpec:
    """Two-player benchmark with private signals of precision (p1, p2)."""
    if params.mode not in ("private-competitive", "private-cooperative"):
        raise SpecError(f"mode {params.mode!r} is not a private two-player mode")
    targets = params.targets if params.mode == "private-competitive" else (0.0, 0.0)
    return _tracking_spec(params, n=2,
                          precisions=(params.p1, params.p2),
                          efforts=(params.r1, params.r2),
                          targets=targets)


def build_pooled(params: ScenarioParams) -> GameSpec:
    """Both players observe one shared channel of precision p1 + p2."""
    if params.mode not in ("pooled-competitive", "pooled-cooperative"):
        raise SpecError(f"mode {params.mode!r} is not a pooled mode")
    targets = params.targets if params.mode == "pooled-competitive" else (0.0, 0.0)
    p = params.p1 + params.p2
    return _tracking_spec(params, n=2,
                          precisions=(p, p),
                          efforts=(params.r1, params.r2),
                          targets=targets,
                          obs_block=(1, 1))


def build_single_player(params: ScenarioParams) -> GameSpec:
    """One-player tracking problem; ``zero-control-gain`` removes the
    control from the state drift so the signal is exogenous."""
    if params.mode not in ("single-player", "zero-control-gain"):
        raise SpecError(f"mode {params.mode!r} is not a single-player mode")
    spec = _tracking_spec(params, n=1,
                          precisions=(params.p1,),
                          efforts=(params.r1,),
                          targets=(params.targets[0],))
    if params.mode == "zero-control-gain":
        spec.B = np.zeros_like(spec.B)
    return validate_spec(spec)


def build_scenario(params: ScenarioParams) -> GameSpec:
    if params.mode.startswith("private"):
        return build_two_player_tracking(params)
    if params.mode.startswith("pooled"):
        return build_pooled(params)
    return build_single_player(params)


def load_scenario(path: str) -> tuple[ScenarioParams, GameSpec]:
    """Read a scenario JSON file (ScenarioParams fields plus optional raw
    ``overrides`` applied to the built spec, matrices row-major)."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SpecError("scenario file must contain a JSON object")
    overrides = doc.pop("overrides", {})
    known = {f for f in ScenarioParams.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise SpecError(f"unknown scenario fields: {sorted(unknown)}")
    if "targets" in doc:
        doc["targets"] = tuple(doc["targets"])
    params = ScenarioParams(**doc)
    spec = build_scenario(params)
    for name, value in overrides.items():
        if not hasattr(spec, name):
            raise SpecError(f"unknown override field {name!r}")
        current = getattr(spec, name)
        arr = np.asarray(value, dtype=float)
        if arr.shape != current.shape:
            raise SpecError(f"override {name!r} has shape {arr.shape}, "
                            f"expected {current.shape}")
        setattr(spec, name, arr)
    return params, validate_spec(spec)
