"""Reflected and free fractional Ornstein-Uhlenbeck paths.

The reflected path solves dX = -alpha X dt + sigma dW^H + dL with X >= b,
where L is the minimal non-decreasing pushing process.  The scheme is Euler
with projection onto [b, inf), which is the per-step Skorokhod map: the
balance identity and the complementarity condition hold exactly on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp

import numpy as np

from .errors import ParameterError, RejectedInputError, StructuralError
from .fgn import NoisePair
from .fraccalc import Grid, SampledFn, SamplePath

__all__ = [
    "ModelParams",
    "RfouPath",
    "skorokhod_map",
    "simulate_rfou",
    "simulate_fou",
    "holder_norm",
    "sup_norm",
    "gronwall_bound",
    "holder_bound",
    "write_path_csv",
]


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    sigma: float
    barrier: float = 0.0
    x0: float = 0.0
    hurst: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "sigma", "barrier", "x0", "hurst"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ParameterError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if self.barrier < 0:
            raise ParameterError(f"barrier must be >= 0, got {self.barrier}")
        if self.x0 < self.barrier:
            raise ParameterError(f"x0={self.x0} lies below the barrier {self.barrier}")
        if not 0 < self.hurst < 1:
            raise ParameterError(f"hurst must lie in (0, 1), got {self.hurst}")

    def scaled(self, c: float) -> "ModelParams":
        """Same drift, everything else multiplied by c > 0."""
        return ModelParams(self.alpha, c * self.sigma, c * self.barrier, c * self.x0, self.hurst)


@dataclass(frozen=True)
class RfouPath:
    grid: Grid
    X: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)
    params: ModelParams
    noise: NoisePair | None = field(default=None, repr=False)

    def __post_init__(self):
        n = self.grid.steps + 1
        X = np.array(self.X, dtype=float)
        L = np.array(self.L, dtype=float)
        if X.shape != (n,) or L.shape != (n,):
            raise StructuralError("X and L must have one value per grid node")
        if self.noise is not None and self.noise.grid != self.grid:
            raise StructuralError("noise lives on a different grid")
        X.flags.writeable = False
        L.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "L", L)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def state(self) -> SamplePath:
        return SampledFn(self.grid, self.X)

    def local_time(self) -> SamplePath:
        return SampledFn(self.grid, self.L)

    def balance_residual(self) -> float:
        """max_i |X_i - (x0 - alpha sum_{j<i} X_j dt + sigma W^H_i + L_i)|."""
        if self.noise is None:
            raise StructuralError("path carries no driving noise")
        p = self.params
        drift = np.concatenate(([0.0], np.cumsum(self.X[:-1]))) * self.grid.dt
        rhs = p.x0 - p.alpha * drift + p.sigma * self.noise.fbm.values + self.L
        return float(np.max(np.abs(self.X - rhs)))


def skorokhod_map(free_path: SamplePath, barrier: float) -> tuple[SamplePath, SamplePath]:
    """Reflect a path at the barrier: L = max(0, running max of b - psi), X = psi + L."""
    psi = free_path.values
    if psi[0] < barrier:
        raise RejectedInputError(f"path starts at {psi[0]} below the barrier {barrier}")
    L = np.maximum.accumulate(np.maximum(barrier - psi, 0.0))
    X = np.maximum(psi + L, barrier)
    return SampledFn(free_path.grid, X), SampledFn(free_path.grid, L)


def _euler(params: ModelParams, noise: NoisePair, reflect: bool):
    dwh = np.diff(noise.fbm.values).tolist()
    a, s, b, dt = params.alpha, params.sigma, params.barrier, noise.grid.dt
    damp = 1.0 - a * dt
    xs = [params.x0]
    ls = [0.0]
    x, push = params.x0, 0.0
    # plain loop: the projection makes the recursion nonlinear
    for d in dwh:
        x = damp * x + s * d
        if reflect and x < b:
            push += b - x
            x = b
        xs.append(x)
        ls.append(push)
    return np.array(xs), np.array(ls)


def simulate_rfou(params: ModelParams, noise: NoisePair) -> RfouPath:
    """Euler scheme with projection at the barrier, driven by noise.fbm."""
    if noise.kernels.hurst != params.hurst:
        raise StructuralError("noise and params disagree on the Hurst index")
    X, L = _euler(params, noise, reflect=True)
    return RfouPath(noise.grid, X, L, params, noise)


def simulate_fou(params: ModelParams, noise: NoisePair) -> SamplePath:
    """The same Euler recursion without reflection (barrier ignored)."""
    if noise.kernels.hurst != params.hurst:
        raise StructuralError("noise and params disagree on the Hurst index")
    X, _ = _euler(params, noise, reflect=False)
    return SampledFn(noise.grid, X)


def sup_norm(path: SamplePath) -> float:
    return float(np.max(np.abs(path.values)))


def holder_norm(path: SamplePath, beta: float) -> float:
    """max over node pairs of |x_r - x_s| / |r - s|^beta."""
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    v = path.values
    t = path.times
    best = 0.0
    for lag in range(1, len(v)):
        d = np.max(np.abs(v[lag:] - v[:-lag]))
        if d > 0:
            best = max(best, d / (t[lag] - t[0]) ** beta)
    return float(best)


def gronwall_bound(params: ModelParams, fbm: SamplePath) -> float:
    """Pathwise bound on sup|X| for b = 0: (2 x0 + 2 sigma |W^H|_inf) exp(2|alpha| T)."""
    T = fbm.grid.horizon
    return (2 * params.x0 + 2 * params.sigma * sup_norm(fbm)) * exp(2 * abs(params.alpha) * T)


def holder_bound(params: ModelParams, path: RfouPath, eps: float = 0.05) -> float:
    """2|alpha| |X|_inf T^(1+eps-H) + 2 sigma |W^H|_(H-eps), the Hölder-norm bound for b = 0."""
    H, T = params.hurst, path.grid.horizon
    if path.noise is None:
        raise StructuralError("path carries no driving noise")
    return (
        2 * abs(params.alpha) * sup_norm(path.state()) * T ** (1 + eps - H)
        + 2 * params.sigma * holder_norm(path.noise.fbm, H - eps)
    )


def write_path_csv(fh, path: RfouPath):
    """CSV with header t,X,L,WH, one row per node."""
    wh = path.noise.fbm.values if path.noise is not None else np.full(len(path.X), np.nan)
    fh.write("t,X,L,WH\n")
    for row in zip(path.times, path.X, path.L, wh):
        fh.write(",".join(repr(float(v)) for v in row) + "\n")
