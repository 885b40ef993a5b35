"""Fractional Brownian motion: constants, kernels, samplers, fundamental martingale.

All samplers are BM-first: a standard Brownian motion W is drawn on the grid and
the fBm W^H and the fundamental martingale M^H are linear images of its
increments, so the three processes live on one probability space.

Kernel weights are cell averages, (1/dt) * int_{t_j}^{t_{j+1}} K(t_i, s) ds,
obtained from a closed-form primitive of the Molchan-Golosov kernel, so the
endpoint singularities are integrated rather than sampled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import gamma, sqrt
from typing import Any

import numpy as np
from scipy import linalg, special

from .errors import NumericalError, ParameterError, StructuralError
from .fraccalc import Grid, SampledFn, SamplePath, frac_op_left, power_rule

__all__ = [
    "HURST_MARGIN",
    "KernelSet",
    "NoisePair",
    "make_kernels",
    "covariance",
    "sample_bm",
    "sample_noise",
    "fbm_from_bm",
    "fbm_cholesky",
    "fundamental_martingale",
    "bm_from_fbm",
    "whiten",
    "kh_inverse",
    "kernel_primitive",
    "write_noise_csv",
]

HURST_MARGIN = 1e-3


def _check_hurst(H: float) -> float:
    H = float(H)
    if not (HURST_MARGIN <= H <= 1 - HURST_MARGIN):
        raise ParameterError(
            f"Hurst index must lie in [{HURST_MARGIN}, {1 - HURST_MARGIN}], got {H}"
        )
    return H


def hurst_constants(H: float) -> dict[str, float]:
    b = sqrt(2 * H * gamma(1.5 - H) / (gamma(H + 0.5) * gamma(2 - 2 * H)))
    return {
        "b_H": b,
        "C_H": b * (H - 0.5),
        "kappa_H": 2 * H * gamma(1.5 - H) * gamma(H + 0.5),
        "lambda_H": 2 * H * gamma(3 - 2 * H) * gamma(H + 0.5) / gamma(1.5 - H),
    }


def _tail_integral(x: np.ndarray, H: float) -> np.ndarray:
    """int_x^1 w^{-2H} (1 - w)^{H - 1/2} dw for 0 < x <= 1 (any H in (0, 1))."""
    a, b = 1.0 - 2.0 * H, H + 0.5
    out = np.empty_like(x)
    hi = x >= 0.5
    v = 1.0 - x[hi]
    out[hi] = v**b / b * special.hyp2f1(b, 2 * H, b + 1, v)
    lo = ~hi
    if np.any(lo):
        # antiderivative w^a/a 2F1(a, 1-b; a+1; w), continued to a < 0
        def prim(w):
            return w**a / a * special.hyp2f1(a, 1 - b, a + 1, w)

        at_half = 0.5**b / b * special.hyp2f1(b, 2 * H, b + 1, 0.5)
        out[lo] = at_half + prim(0.5) - prim(x[lo])
    return out


def kernel_primitive(x: np.ndarray, H: float) -> np.ndarray:
    """G(x) = int_0^x K_H(1, y) dy for x in [0, 1].

    Exchanging the order of integration in the two-term kernel gives
    G(x) = b_H/(H+1/2) * [B(x; 3/2-H, H+1/2) - (H-1/2) x^{H+1/2} int_x^1 w^{-2H}(1-w)^{H-1/2} dw]
    with B the (unregularised) incomplete beta function.  By homogeneity
    int_0^s K_H(t, r) dr = t^{H+1/2} G(s/t).
    """
    H = _check_hurst(H)
    x = np.asarray(x, dtype=float)
    b = hurst_constants(H)["b_H"]
    a, c = 1.5 - H, H + 0.5
    flat = x.ravel()
    out = np.zeros_like(flat)
    pos = flat > 0
    xp = flat[pos]
    inc_beta = special.betainc(a, c, xp) * special.beta(a, c)
    if H == 0.5:
        out[pos] = xp
    else:
        out[pos] = b / c * (inc_beta - (H - 0.5) * xp**c * _tail_integral(xp, H))
    return out.reshape(x.shape)


def _unit_table(H: float, n: int, which: str) -> np.ndarray:
    """Cell-averaged K_H ("K") or k_H ("k") on the grid with unit step, rows i = 0..n.

    Entry (i, j) does not depend on n, so the table for n is the leading
    block of one cached table of power-of-two size.
    """
    size = 1 << max(8, (n - 1).bit_length())
    return _unit_table_full(H, size, which)[: n + 1, :n]


@lru_cache(maxsize=4)
def _unit_table_full(H: float, n: int, which: str) -> np.ndarray:
    U = np.zeros((n + 1, n))
    if H == 0.5:
        U[np.tril_indices(n + 1, -1, n)] = 1.0
    else:
        p = 1.5 - H
        beta_pp = special.beta(p, p)
        for i in range(1, n + 1):
            x = np.arange(i + 1) / i
            if which == "K":
                U[i, :i] = i ** (H + 0.5) * np.diff(kernel_primitive(x, H))
            else:
                U[i, :i] = i ** (2 - 2 * H) * np.diff(special.betainc(p, p, x) * beta_pp)
        if which == "k":
            U /= hurst_constants(H)["kappa_H"]
    U.flags.writeable = False
    return U


@dataclass(frozen=True)
class KernelSet:
    """Hurst-dependent constants and cell-averaged kernel tables on one grid."""

    hurst: float
    grid: Grid
    b_H: float = field(init=False)
    C_H: float = field(init=False)
    kappa_H: float = field(init=False)
    lambda_H: float = field(init=False)

    def __post_init__(self):
        H = _check_hurst(self.hurst)
        object.__setattr__(self, "hurst", H)
        for name, value in hurst_constants(H).items():
            object.__setattr__(self, name, value)

    @property
    def is_brownian(self) -> bool:
        return self.hurst == 0.5

    @cached_property
    def K(self) -> np.ndarray:
        """K[i, j] = cell average of K_H(t_i, .) over [t_j, t_{j+1}]; zero for j >= i."""
        H, dt = self.hurst, self.grid.dt
        U = _unit_table(H, self.grid.steps, "K")
        return U if H == 0.5 else U * dt ** (H - 0.5)

    @cached_property
    def k(self) -> np.ndarray:
        """k[i, j] = cell average of k_H(t_i, .) over [t_j, t_{j+1}]; zero for j >= i."""
        H, dt = self.hurst, self.grid.dt
        U = _unit_table(H, self.grid.steps, "k")
        return U if H == 0.5 else U * dt ** (1 - 2 * H)

    @cached_property
    def increments(self) -> np.ndarray:
        """Lower-triangular map from BM increments to fBm increments."""
        H, dt = self.hurst, self.grid.dt
        inc = np.diff(_unit_table(H, self.grid.steps, "K"), axis=0)
        if H != 0.5:
            inc *= dt ** (H - 0.5)
        inc.flags.writeable = False
        return inc

    @cached_property
    def martingale_weights(self) -> np.ndarray:
        """Per-cell weights w_j with dM_j = w_j dW_j.

        w_j = b_H/(2H) * sqrt(mean of s^{1-2H} over the cell), so that the
        increment variances add up to lambda_H^{-1} t^{2-2H} exactly.
        """
        H, dt = self.hurst, self.grid.dt
        if H == 0.5:
            return np.ones(self.grid.steps)
        j = np.arange(self.grid.steps, dtype=float)
        e = 2 - 2 * H
        mean_sq = dt ** (1 - 2 * H) * ((j + 1) ** e - j**e) / e
        return self.b_H / (2 * H) * np.sqrt(mean_sq)

    @cached_property
    def mean_weights(self) -> np.ndarray:
        """b_H/(2H) times the cell mean of s^{1/2-H}, the weight used by bm_from_fbm."""
        H, dt = self.hurst, self.grid.dt
        if H == 0.5:
            return np.ones(self.grid.steps)
        j = np.arange(self.grid.steps, dtype=float)
        e = 1.5 - H
        return self.b_H / (2 * H) * dt ** (0.5 - H) * ((j + 1) ** e - j**e) / e

    @cached_property
    def qv(self) -> np.ndarray:
        """<M^H>_t = t^{2-2H} / lambda_H at every node."""
        return self.grid.times ** (2 - 2 * self.hurst) / self.lambda_H


@lru_cache(maxsize=8)
def make_kernels(H: float, grid: Grid) -> KernelSet:
    """Shared, immutable kernel set for (H, grid); repeated calls reuse the tables."""
    return KernelSet(float(H), grid)


def covariance(H: float, t, s):
    """R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise ParameterError("times must be non-negative")
    r = 0.5 * (t ** (2 * H) + s ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(r) if r.ndim == 0 else r


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_bm(grid: Grid, seed) -> SamplePath:
    """Standard Brownian motion on the grid, W(0) = 0."""
    dw = _rng(seed).standard_normal(grid.steps) * sqrt(grid.dt)
    return SampledFn(grid, np.concatenate(([0.0], np.cumsum(dw))))


def _require_grid(path: SampledFn, kernels: KernelSet):
    if path.grid != kernels.grid:
        raise StructuralError(
            f"path grid {path.grid} does not match kernel grid {kernels.grid}"
        )


def fbm_from_bm(bm: SamplePath, kernels: KernelSet) -> SamplePath:
    """W^H(t_i) = sum_j Kbar(t_i, j) dW_j, accumulated from the increment map."""
    _require_grid(bm, kernels)
    if kernels.is_brownian:
        return bm
    dwh = kernels.increments @ np.diff(bm.values)
    return SampledFn(bm.grid, np.concatenate(([0.0], np.cumsum(dwh))))


def fbm_cholesky(H: float, grid: Grid, seed, max_steps: int = 2**12) -> SamplePath:
    """Exact fBm sample by Cholesky factorisation of the covariance matrix."""
    H = _check_hurst(H)
    if grid.steps > max_steps:
        raise ParameterError(f"Cholesky sampler limited to {max_steps} steps")
    t = grid.times[1:]
    cov = covariance(H, t[:, None], t[None, :])
    try:
        chol = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"covariance not positive definite for H={H}, n={grid.steps}"
        ) from exc
    z = _rng(seed).standard_normal(grid.steps)
    return SampledFn(grid, np.concatenate(([0.0], chol @ z)))


@dataclass(frozen=True)
class NoisePair:
    """Driving Brownian motion and the fBm built from it."""

    bm: SamplePath
    fbm: SamplePath
    kernels: KernelSet
    seed: Any = None

    def __post_init__(self):
        if self.bm.grid != self.fbm.grid or self.bm.grid != self.kernels.grid:
            raise StructuralError("noise components must share the kernel grid")

    @property
    def grid(self) -> Grid:
        return self.kernels.grid


def sample_noise(kernels: KernelSet, seed) -> NoisePair:
    bm = sample_bm(kernels.grid, seed)
    return NoisePair(bm, fbm_from_bm(bm, kernels), kernels, seed)


def fundamental_martingale(noise: NoisePair, route: str = "bm") -> SamplePath:
    """M^H on the grid.

    route="bm": dM_j = w_j dW_j (distribution-exact, the default).
    route="kernel": M(t_i) = sum_j kbar(t_i, j) dW^H_j, for cross-validation.
    """
    ks = noise.kernels
    if route == "bm":
        dm = ks.martingale_weights * np.diff(noise.bm.values)
        return SampledFn(ks.grid, np.concatenate(([0.0], np.cumsum(dm))))
    if route == "kernel":
        if ks.is_brownian:
            return noise.fbm
        return SampledFn(ks.grid, ks.k @ np.diff(noise.fbm.values))
    raise ParameterError(f"unknown route {route!r}")


def bm_from_fbm(fbm: SamplePath, kernels: KernelSet) -> SamplePath:
    """Recover the driving Brownian motion from an fBm path.

    M^H is formed with the cell-averaged k_H weights, then dB = dM / w_j with
    w_j the cell mean of b_H/(2H) s^{1/2-H}, the discrete form of
    B = (2H/b_H) int s^{H-1/2} dM^H.  The mean weight (rather than the RMS
    weight of the simulation route) matches the forward map near s = 0.
    """
    _require_grid(fbm, kernels)
    if kernels.is_brownian:
        return fbm
    m = kernels.k @ np.diff(fbm.values)
    db = np.diff(m) / kernels.mean_weights
    return SampledFn(fbm.grid, np.concatenate(([0.0], np.cumsum(db))))


def whiten(values: np.ndarray, kernels: KernelSet) -> np.ndarray:
    """Exact inverse of the discrete kernel map on increments.

    ``values`` holds node values (last axis of length n+1, optionally batched
    along leading axes); returns the increments dW that the kernel map sends
    to those node increments.  For an fBm built by fbm_from_bm this recovers
    the driving BM increments to rounding error.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != kernels.grid.steps + 1:
        raise StructuralError("values do not match the kernel grid")
    dv = np.diff(v, axis=-1)
    if kernels.is_brownian:
        return dv
    flat = dv.reshape(-1, dv.shape[-1]).T
    sol = linalg.solve_triangular(kernels.increments, flat, lower=True, check_finite=False)
    return sol.T.reshape(dv.shape)


def kh_inverse(phi: SampledFn, kernels: KernelSet) -> SampledFn:
    """(K_H^{-1} phi)(t) = t^{H-1/2} D_{0+}^{H-1/2}(u^{1/2-H} phi'(u)) / (b_H Gamma(H+1/2)).

    D^{H-1/2} reads as I^{1/2-H} for H < 1/2 (the constant C_H Gamma(H-1/2)
    equals b_H Gamma(H+1/2), so one formula covers both regimes).  phi' comes
    from forward differences.  The constant part phi'(0) is handled with the
    power rule; at t = 0, where that term is singular for H > 1/2, the value
    is its average over the first cell.
    """
    _require_grid(phi, kernels)
    grid, H = phi.grid, kernels.hurst
    d = np.diff(phi.values) / grid.dt
    fprime = np.append(d, d[-1])
    if kernels.is_brownian:
        return SampledFn(grid, fprime)
    t = grid.times
    c = fprime[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(t > 0, t ** (0.5 - H), 0.0)
    rest = SampledFn(grid, weight * (fprime - c))
    op_rest = frac_op_left(rest, H - 0.5).values
    norm = kernels.b_H * gamma(H + 0.5)
    out = np.empty_like(t)
    tp = t[1:]
    lead = c * power_rule(tp, 0.5 - H, H - 0.5)
    out[1:] = tp ** (H - 0.5) * (lead + op_rest[1:]) / norm
    lead_coef = c * gamma(1.5 - H) / gamma(2 - 2 * H) / norm
    if H > 0.5:
        out[0] = lead_coef * grid.dt ** (0.5 - H) / (1.5 - H)
    else:
        out[0] = 0.0
    return SampledFn(grid, out)


def write_noise_csv(fh, noise: NoisePair, martingale: SamplePath | None = None):
    """Write ``t,W,WH,M`` rows, one per node."""
    m = martingale if martingale is not None else fundamental_martingale(noise)
    w = csv.writer(fh)
    w.writerow(["t", "W", "WH", "M"])
    for row in zip(noise.grid.times, noise.bm.values, noise.fbm.values, m.values):
        w.writerow([repr(float(x)) for x in row])
