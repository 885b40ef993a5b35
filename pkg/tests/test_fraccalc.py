import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfou.errors import ParameterError, RejectedInputError, StructuralError
from rfou.fgn import fbm_cholesky
from rfou.fraccalc import (
    Grid,
    SampledFn,
    frac_derivative_left,
    frac_derivative_right,
    frac_integral_left,
    frac_integral_right,
    frac_op_left,
    holder_exponent,
    power_rule,
    trapezoid,
    young_integral,
)

GRID = Grid(1.0, 1024)
T = GRID.times


def sampled(values, grid=GRID):
    return SampledFn(grid, values)


# ---------------------------------------------------------------- containers


def test_grid_validation():
    with pytest.raises(ParameterError):
        Grid(0.0, 10)
    with pytest.raises(ParameterError):
        Grid(1.0, 1)
    with pytest.raises(ParameterError):
        Grid(1.0, 2.5)
    g = Grid(2.0, 4)
    assert g.dt == 0.5
    assert g.times[-1] == 2.0
    assert not g.times.flags.writeable


def test_sampled_fn_checks_shape_and_finiteness():
    with pytest.raises(StructuralError):
        SampledFn(Grid(1.0, 4), np.zeros(4))
    with pytest.raises(RejectedInputError):
        SampledFn(Grid(1.0, 2), [0.0, np.nan, 1.0])
    f = SampledFn(Grid(1.0, 2), [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        f.values[0] = 3.0
    with pytest.raises(StructuralError):
        f + SampledFn(Grid(2.0, 2), [0.0, 1.0, 2.0])
    assert np.allclose((2 * f - f).values, f.values)


def test_order_ranges_rejected():
    f = sampled(T)
    with pytest.raises(ParameterError):
        frac_integral_left(f, 2.0)
    with pytest.raises(ParameterError):
        frac_integral_right(f, 1.2)
    with pytest.raises(ParameterError):
        frac_derivative_left(f, 1.0)
    with pytest.raises(ParameterError):
        frac_derivative_right(f, 0.0)


# ------------------------------------------------------------ closed forms


def test_gamma_against_reference_values():
    # reference values from mpmath at 30 digits
    mpmath.mp.dps = 30
    for x in (0.1, 0.5, 1.0, 1.5, 2.3, 3.0, 4.7, 7.5, 10.0, 0.75):
        ref = float(mpmath.gamma(x))
        assert math.gamma(x) == pytest.approx(ref, rel=1e-12)


def test_half_derivative_of_t_at_one():
    # D^{1/2} t = t^{1/2} / Gamma(3/2), equal to 2/sqrt(pi) at t = 1
    d = frac_derivative_left(sampled(T), 0.5)
    assert d.values[-1] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-10)
    assert 2 / math.sqrt(math.pi) == pytest.approx(1.1284, abs=1e-4)


@pytest.mark.parametrize("order", [0.2, 0.5, 0.9])
def test_integral_of_linear_function_is_exact(order):
    # product trapezoid integrates piecewise linear data exactly
    f = sampled(2.0 + 3.0 * T)
    exact = 2.0 * power_rule(T, 0.0, -order) + 3.0 * power_rule(T, 1.0, -order)
    assert np.allclose(frac_integral_left(f, order).values, exact, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("order", [1.3, 1.8])
def test_integral_above_one_is_composed(order):
    # the inner integral behaves like t^(order-1) near 0, so the outer
    # trapezoid rule converges like dt^order there
    f = sampled(2.0 + 3.0 * T)
    exact = 2.0 * power_rule(T, 0.0, -order) + 3.0 * power_rule(T, 1.0, -order)
    got = frac_integral_left(f, order).values
    assert np.max(np.abs(got - exact)) / np.max(exact) < 1e-4


@pytest.mark.parametrize("order", [0.2, 0.5, 0.8])
def test_derivative_of_linear_function_is_exact(order):
    f = sampled(3.0 * T)
    exact = 3.0 * power_rule(T, 1.0, order)
    assert np.allclose(frac_derivative_left(f, order).values, exact, rtol=1e-11, atol=1e-12)


def test_derivative_of_constant():
    # D^a c = c t^-a / Gamma(1-a); node 0 gets the value at t_1
    f = sampled(np.full(len(T), 2.0))
    d = frac_derivative_left(f, 0.4)
    assert np.allclose(d.values[1:], 2.0 * T[1:] ** -0.4 / math.gamma(0.6), rtol=1e-11)
    assert d.values[0] == pytest.approx(d.values[1])


def test_right_integral_is_mirror():
    # I_{T-}^a 1 = (T - t)^a / Gamma(a + 1)
    g = frac_integral_right(sampled(np.ones(len(T))), 0.3)
    assert np.allclose(g.values, (1 - T) ** 0.3 / math.gamma(1.3), atol=1e-12)


def test_power_rule_special_cases():
    # D^1 of t^0 vanishes: 1/Gamma(0)
    assert np.all(power_rule(T, 0.0, 1.0) == 0)
    with pytest.raises(ParameterError):
        power_rule(T, -1.0, 0.5)


# ------------------------------------------------------------ round trips


@pytest.mark.parametrize("order", [0.3, 0.6])
def test_inversion_round_trip_converges(order):
    errs = []
    for n in (256, 1024):
        g = Grid(1.0, n)
        f = SampledFn(g, np.sin(3 * g.times) + g.times**2)
        back = frac_derivative_left(frac_integral_left(f, order), order)
        errs.append(np.max(np.abs(back.values - f.values)))
    assert errs[1] < errs[0] / 2
    assert errs[1] < 1e-3


def test_right_inversion_round_trip():
    f = sampled(np.cos(2 * T) * (1 - T))
    back = frac_derivative_right(frac_integral_right(f, 0.5), 0.5)
    assert np.max(np.abs(back.values - f.values)) < 2e-3


def test_frac_op_left_sign_convention():
    f = sampled(T)
    assert np.array_equal(frac_op_left(f, -0.3).values, frac_integral_left(f, 0.3).values)
    assert np.array_equal(frac_op_left(f, 0.3).values, frac_derivative_left(f, 0.3).values)
    assert frac_op_left(f, 0) is f


def test_integration_by_parts():
    f = sampled(np.exp(-T))
    g = sampled(1 + T**2)
    lhs = trapezoid(f.values * frac_integral_left(g, 0.4).values, GRID.dt)
    rhs = trapezoid(g.values * frac_integral_right(f, 0.4).values, GRID.dt)
    assert lhs == pytest.approx(rhs, rel=1e-5)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-3, 3), b=st.floats(-3, 3), order=st.floats(0.05, 1.95),
)
def test_integral_is_linear(a, b, order):
    g = Grid(1.0, 64)
    f1 = SampledFn(g, np.sin(g.times))
    f2 = SampledFn(g, g.times**2)
    lhs = frac_integral_left(a * f1 + b * f2, order).values
    rhs = a * frac_integral_left(f1, order).values + b * frac_integral_left(f2, order).values
    assert np.allclose(lhs, rhs, atol=1e-12)


# ---------------------------------------------------------- Young integral


def test_holder_exponent():
    assert holder_exponent(sampled(np.ones(len(T)))) == 1.0
    assert holder_exponent(sampled(T)) == pytest.approx(1.0, abs=1e-6)
    wh = fbm_cholesky(0.7, Grid(1.0, 1024), 1)
    assert 0.55 < holder_exponent(wh) < 0.85


def test_young_integral_smooth():
    # int_0^1 1 dt = 1 and int_0^1 t dt = 1/2
    g = Grid(1.0, 4096)
    t = g.times
    assert young_integral(SampledFn(g, np.ones_like(t)), SampledFn(g, t)) == pytest.approx(1.0, rel=1e-4)
    assert young_integral(SampledFn(g, t), SampledFn(g, t)) == pytest.approx(0.5, rel=1e-4)


def test_young_integral_against_fbm_riemann_sum():
    g = Grid(1.0, 2048)
    wh = fbm_cholesky(0.75, g, 3)
    f = SampledFn(g, 1 + np.cos(2 * g.times))
    rs = float(np.sum(f.values[:-1] * np.diff(wh.values)))
    assert young_integral(f, wh) == pytest.approx(rs, rel=0.01)


def test_young_integral_rejects_rough_pairs():
    g = Grid(1.0, 1024)
    w1 = fbm_cholesky(0.3, g, 1)
    w2 = fbm_cholesky(0.3, g, 2)
    with pytest.raises(ParameterError):
        young_integral(w1, w2)
    with pytest.raises(ParameterError):
        young_integral(SampledFn(g, g.times), SampledFn(g, g.times), order=1.5)
