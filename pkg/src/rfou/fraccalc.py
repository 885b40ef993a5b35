"""Riemann-Liouville fractional integrals and derivatives of sampled functions.

Every operator works on a uniform grid and uses product integration: the
sampled function is interpolated piecewise linearly and the singular power
weight is integrated exactly against each linear piece.  Right-sided
operators are the mirror images of the left-sided ones with the complex phase
left out, so everything stays real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma
from typing import Callable

import numpy as np

from .errors import ParameterError, RejectedInputError, StructuralError

__all__ = [
    "Grid",
    "SampledFn",
    "SamplePath",
    "frac_integral_left",
    "frac_integral_right",
    "frac_derivative_left",
    "frac_derivative_right",
    "frac_op_left",
    "power_rule",
    "young_integral",
    "holder_exponent",
    "trapezoid",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid t_i = i*T/n, i = 0..n, on [0, T]."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ParameterError(f"steps must be an integer >= 2, got {self.steps}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @cached_property
    def times(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.dt
        t[-1] = self.horizon
        t.flags.writeable = False
        return t

    def with_steps(self, steps: int) -> "Grid":
        return Grid(self.horizon, steps)


@dataclass(frozen=True)
class SampledFn:
    """Real function sampled at the n+1 nodes of a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.steps + 1,):
            raise StructuralError(
                f"expected {self.grid.steps + 1} samples, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise RejectedInputError("sampled values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> "SampledFn":
        return cls(grid, np.broadcast_to(f(grid.times), grid.times.shape))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return len(self.values)

    def _combine(self, other, op):
        if isinstance(other, SampledFn):
            if other.grid != self.grid:
                raise StructuralError("sampled functions live on different grids")
            other = other.values
        return SampledFn(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFn(self.grid, -self.values)


# Sample paths (Brownian, fractional, martingale, ...) are sampled functions.
SamplePath = SampledFn


def _check_order(order: float, lo: float, hi: float, what: str) -> float:
    order = float(order)
    if not (lo < order < hi):
        raise ParameterError(f"{what} order must lie in ({lo}, {hi}), got {order}")
    return order


def _conv(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """c[i] = sum_k weights[k] * values[i - k] for i < len(values)."""
    return np.convolve(values, weights)[: len(values)]


def _rl_integral(v: np.ndarray, order: float, dt: float) -> np.ndarray:
    n = len(v) - 1
    a = order
    k = np.arange(n + 1, dtype=float)
    c = np.empty(n + 1)
    c[0] = 1.0
    kk = k[1:]
    c[1:] = (kk + 1) ** (a + 1) - 2 * kk ** (a + 1) + (kk - 1) ** (a + 1)
    first = np.zeros(n + 1)
    first[1:] = (kk - 1) ** (a + 1) - (kk - 1 - a) * kk**a
    body = np.zeros(n + 1)
    body[1:] = _conv(v[1:], c)[: n]
    return dt**a / gamma(a + 2) * (first * v[0] + body)


def _marchaud(v: np.ndarray, order: float, dt: float) -> np.ndarray:
    n = len(v) - 1
    a = order
    k = np.arange(n + 1, dtype=float)
    A = np.zeros(n + 1)
    B = np.zeros(n + 1)
    kk = k[2:]
    A[2:] = ((kk - 1) ** (-a) - kk ** (-a)) / a
    B[2:] = kk * A[2:] - (kk ** (1 - a) - (kk - 1) ** (1 - a)) / (1 - a)
    dv = np.diff(v)
    s = np.zeros(n + 1)
    s[1:] = dv / (1 - a)
    s += v * np.cumsum(A) - _conv(v, A)
    s -= np.convolve(dv, B)[: n + 1]
    out = np.empty(n + 1)
    t = k[1:] * dt
    out[1:] = (v[1:] * t ** (-a) + a * dt ** (-a) * s[1:]) / gamma(1 - a)
    # t = 0: continuity when f(0) = 0, otherwise the leading term at t_1
    out[0] = 0.0 if v[0] == 0 else v[0] * dt ** (-a) / gamma(1 - a)
    return out


def frac_integral_left(f: SampledFn, order: float) -> SampledFn:
    """Left Riemann-Liouville integral I_{0+}^order f at every node, order in (0, 2)."""
    order = _check_order(order, 0.0, 2.0, "integral")
    dt = f.grid.dt
    if order > 1:
        inner = _rl_integral(f.values, order - 1, dt)
        return SampledFn(f.grid, _rl_integral(inner, 1.0, dt))
    return SampledFn(f.grid, _rl_integral(f.values, order, dt))


def frac_integral_right(f: SampledFn, order: float) -> SampledFn:
    """Right Riemann-Liouville integral I_{T-}^order f (real version), order in (0, 1)."""
    order = _check_order(order, 0.0, 1.0, "integral")
    return SampledFn(f.grid, _rl_integral(f.values[::-1], order, f.grid.dt)[::-1])


def frac_derivative_left(f: SampledFn, order: float) -> SampledFn:
    """Left Marchaud derivative D_{0+}^order f, order in (0, 1)."""
    order = _check_order(order, 0.0, 1.0, "derivative")
    return SampledFn(f.grid, _marchaud(f.values, order, f.grid.dt))


def frac_derivative_right(f: SampledFn, order: float) -> SampledFn:
    """Right Marchaud derivative D_{T-}^order f (real version), order in (0, 1)."""
    order = _check_order(order, 0.0, 1.0, "derivative")
    return SampledFn(f.grid, _marchaud(f.values[::-1], order, f.grid.dt)[::-1])


def frac_op_left(f: SampledFn, order: float) -> SampledFn:
    """D_{0+}^order for order in (-1, 1), reading D^order as I^{-order} when order < 0."""
    if order == 0:
        return f
    if order < 0:
        return frac_integral_left(f, -order)
    return frac_derivative_left(f, order)


def power_rule(times: np.ndarray, exponent: float, order: float) -> np.ndarray:
    """Closed form of D_{0+}^order t^exponent (order < 0 means integration).

    D^order t^p = Gamma(p + 1) / Gamma(p + 1 - order) * t^(p - order), p > -1.
    Where the result is singular at t = 0 the value there is returned as inf.
    """
    if exponent <= -1:
        raise ParameterError("exponent must exceed -1")
    t = np.asarray(times, dtype=float)
    denom_arg = exponent + 1 - order
    if denom_arg <= 0 and float(denom_arg).is_integer():
        return np.zeros_like(t)
    coef = gamma(exponent + 1) / gamma(denom_arg)
    with np.errstate(divide="ignore"):
        return coef * t ** (exponent - order)


def trapezoid(values: np.ndarray, dt: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(dt * (v.sum() - 0.5 * (v[0] + v[-1])))


def holder_exponent(f: SampledFn) -> float:
    """Rough discrete Hölder exponent from the scaling of the maximal increment.

    Fits log(max |f(t+h) - f(t)|) against log h over dyadic lags.  Returns 1.0
    for (numerically) constant functions; the value is clipped to [0, 1].
    """
    v = f.values
    n = len(v) - 1
    scale = max(np.max(np.abs(v)), 1.0)
    lags, osc = [], []
    lag = 1
    while lag <= max(n // 8, 1):
        o = np.max(np.abs(v[lag:] - v[:-lag]))
        lags.append(lag * f.grid.dt)
        osc.append(o)
        lag *= 2
    osc = np.asarray(osc)
    if np.all(osc <= 1e-13 * scale) or len(osc) < 2:
        return 1.0
    osc = np.maximum(osc, 1e-300)
    slope = np.polyfit(np.log(lags), np.log(osc), 1)[0]
    return float(np.clip(slope, 0.0, 1.0))


def young_integral(f: SampledFn, g: SampledFn, order: float | None = None) -> float:
    """Riemann-Stieltjes integral of f against g through fractional derivatives.

    Evaluates  int f dg = -int D_{0+}^a f(t) * D_{T-}^{1-a} g_{T-}(t) dt  with
    g_{T-} = g - g(T).  The phases of the two right/left operators combine to
    the real factor -1.  The singular leading term f(0) t^-a / Gamma(1-a) of
    the left derivative is integrated exactly as f(0) * I_{T-}^{1-a}[...](0);
    the regular remainder is summed with the trapezoidal rule.
    """
    if f.grid != g.grid:
        raise StructuralError("f and g must share a grid")
    lam, mu = holder_exponent(f), holder_exponent(g)
    lo, hi = 1.0 - mu, lam
    if lam + mu <= 1.0 or lo >= hi:
        raise ParameterError(
            f"Hölder exponents {lam:.3f} + {mu:.3f} leave no admissible order"
        )
    if order is None:
        order = 0.5 * (max(lo, 0.0) + min(hi, 1.0))
    if not (lo < order < hi and 0 < order < 1):
        raise ParameterError(f"order {order} outside the admissible window ({lo:.3f}, {hi:.3f})")
    grid = f.grid
    g_end = SampledFn(grid, g.values - g.values[-1])
    right = frac_derivative_right(g_end, 1.0 - order).values
    f0 = f.values[0]
    left_rest = frac_derivative_left(SampledFn(grid, f.values - f0), order).values
    singular = f0 * _rl_integral(right[::-1], 1.0 - order, grid.dt)[-1]
    return -(singular + trapezoid(left_rest * right, grid.dt))
