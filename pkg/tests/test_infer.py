import io
import math

import numpy as np
import pytest

from rfou.errors import DegenerateEstimateError, ParameterError, StructuralError
from rfou.fgn import make_kernels, sample_noise
from rfou.fraccalc import Grid, SampledFn
from rfou.infer import (
    EstimateRecord,
    LikelihoodRatio,
    chi_operator_route,
    chi_process,
    kernel_transform,
    likelihood_ratio_fm,
    likelihood_ratio_kinv,
    log_likelihood,
    mle,
    reference_mle_bm,
    reference_sequential_bm,
    sequential_mle,
    sequential_run,
    standardized_stat,
    write_estimates_csv,
)
from rfou.reflect import ModelParams, RfouPath, simulate_rfou


def _path(params, n=512, T=4.0, seed=0):
    ks = make_kernels(params.hurst, Grid(T, n))
    return simulate_rfou(params, sample_noise(ks, seed)), ks


# -------------------------------------------------------- sufficient process


def test_brownian_collapse_of_sufficient_process():
    p = ModelParams(1.0, 1.0, x0=0.5, hurst=0.5)
    path, ks = _path(p)
    sp = chi_process(path, ks)
    dt = ks.grid.dt
    assert np.allclose(sp.chi, path.X[:-1], atol=1e-12)
    assert np.allclose(sp.info[1:], np.cumsum(path.X[:-1] ** 2) * dt, rtol=1e-12)
    assert np.allclose(sp.xt_tilde, path.X - p.x0, atol=1e-12)
    assert np.allclose(sp.lt_tilde, path.L, atol=1e-12)
    assert mle(path, ks).alpha_hat == pytest.approx(reference_mle_bm(path.X, path.L, dt), abs=1e-10)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_chi_of_constant_path_is_the_constant(H):
    ks = make_kernels(H, Grid(4.0, 1024))
    p = ModelParams(1.0, 1.0, x0=2.0, hurst=H)
    X = np.full(1025, 2.0)
    sp = chi_process(RfouPath(ks.grid, X, np.zeros(1025), p), ks)
    op = chi_operator_route(SampledFn(ks.grid, X), ks).values
    assert np.allclose(op, 2.0, rtol=1e-10)
    # the discrete chi converges to the same constant away from t = 0
    assert np.allclose(sp.chi[10:], 2.0, rtol=5e-3)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_score_representation(H):
    # sum chi dL~ - sum chi dX~ = alpha info - sigma sum chi dM, node by node
    p = ModelParams(0.8, 1.3, barrier=0.0, x0=0.2, hurst=H)
    path, ks = _path(p, seed=2)
    sp = chi_process(path, ks)
    sx, sl = sp.score_parts()
    dm = ks.martingale_weights * np.diff(path.noise.bm.values)
    noise = np.concatenate(([0.0], np.cumsum(sp.chi * dm)))
    assert np.allclose(sl - sx, p.alpha * sp.info - p.sigma * noise, atol=1e-10)


def test_kernel_route_matches_whitened_state():
    p = ModelParams(1.0, 1.0, x0=0.5, hurst=0.7)
    path, ks = _path(p, n=1024, seed=1)
    sp = chi_process(path, ks)
    kt = kernel_transform(SampledFn(ks.grid, path.X), ks).values
    assert np.max(np.abs(kt - sp.xt_tilde)) < 0.05 * np.max(np.abs(sp.xt_tilde))


def test_grid_and_hurst_checks():
    p = ModelParams(1.0, 1.0, hurst=0.7)
    path, ks = _path(p, n=64)
    with pytest.raises(StructuralError):
        chi_process(path, make_kernels(0.7, Grid(4.0, 32)))
    with pytest.raises(StructuralError):
        chi_process(path, make_kernels(0.6, ks.grid))
    low = ModelParams(1.0, 1.0, hurst=0.05)
    with pytest.raises(ParameterError):
        chi_process(*_path(low, n=32))


# ------------------------------------------------------------ fixed horizon


def test_noiseless_mle_recovers_alpha():
    p = ModelParams(1.0, 1e-12, x0=1.0, hurst=0.7)
    path, ks = _path(p)
    assert mle(path, ks).alpha_hat == pytest.approx(1.0, abs=1e-6)


def test_degenerate_path_raises():
    ks = make_kernels(0.7, Grid(1.0, 16))
    p = ModelParams(1.0, 1.0, hurst=0.7)
    with pytest.raises(DegenerateEstimateError):
        mle(RfouPath(ks.grid, np.zeros(17), np.zeros(17), p), ks)


def test_scale_equivariance():
    p = ModelParams(0.7, 1.0, barrier=0.1, x0=0.4, hurst=0.6)
    ks = make_kernels(0.6, Grid(4.0, 256))
    noise = sample_noise(ks, 8)
    a = mle(simulate_rfou(p, noise), ks).alpha_hat
    b = mle(simulate_rfou(p.scaled(5.0), noise), ks).alpha_hat
    assert b == pytest.approx(a, rel=1e-10)


def test_mle_maximises_likelihood():
    p = ModelParams(1.0, 1.0, x0=0.5, hurst=0.7)
    path, ks = _path(p, seed=6)
    sp = chi_process(path, ks)
    est = mle(path, ks).alpha_hat
    grid = np.linspace(est - 2, est + 2, 4001)
    ll = log_likelihood(sp, grid, p.sigma)
    assert grid[np.argmax(ll)] == pytest.approx(est, abs=1e-3)
    assert log_likelihood(sp, 0.0, p.sigma) == 0.0


def test_standardized_statistic():
    rec = EstimateRecord(1.5, 4.0, 10.0, "mle")
    assert standardized_stat(rec, 1.0, 2.0) == pytest.approx(0.5)
    with pytest.raises(DegenerateEstimateError):
        standardized_stat(EstimateRecord(1.0, 0.0, 1.0, "mle"), 1.0, 1.0)
    p = ModelParams(1.0, 1.0, x0=0.5, hurst=0.7)
    path, ks = _path(p)
    r = mle(path, ks, alpha_true=1.0)
    assert r.standardized == pytest.approx((r.alpha_hat - 1.0) * math.sqrt(r.info_used))


# --------------------------------------------------------------- sequential


@pytest.mark.parametrize("alpha", [-0.5, 1.0])
def test_sequential_uses_exactly_h(alpha):
    p = ModelParams(alpha, 1.0, x0=0.0, hurst=0.7)
    h = 30.0
    run = sequential_run(p, h, seed=3, max_T=400, dt=0.1)
    sp, tau = run.sufficient, run.tau_index
    assert run.record.hit and run.record.info_used == h
    assert sp.info[tau - 1] < h <= sp.info[tau] == run.record.info_at_stop
    assert run.record.horizon_or_tau == pytest.approx(tau * 0.1)
    # alpha_hat - alpha = -sigma S / h, S the stopped martingale with a partial last cell
    theta = (h - sp.info[tau - 1]) / (sp.info[tau] - sp.info[tau - 1])
    ks = run.path.noise.kernels
    dm = ks.martingale_weights[:tau] * np.diff(run.path.noise.bm.values)[:tau]
    terms = sp.chi[:tau] * dm
    s = terms[:-1].sum() + theta * terms[-1]
    assert run.record.alpha_hat - alpha == pytest.approx(-p.sigma * s / h, abs=1e-10)


def test_sequential_brownian_reference():
    p = ModelParams(1.0, 1.0, x0=0.3, hurst=0.5)
    run = sequential_run(p, 20.0, seed=9, max_T=200, dt=0.05)
    ref, tau = reference_sequential_bm(run.path.X, run.path.L, 0.05, 20.0)
    assert tau == run.tau_index
    assert run.record.alpha_hat == pytest.approx(ref, abs=1e-10)


def test_nominal_denominator_carries_overshoot():
    # without the partial last cell: alpha_hat - alpha = alpha (I_tau - h)/h - sigma S_tau / h
    p = ModelParams(-0.5, 1.0, x0=0.0, hurst=0.7)
    h = 30.0
    run = sequential_run(p, h, seed=3, max_T=400, dt=0.1, partial_last_cell=False)
    sp, tau = run.sufficient, run.tau_index
    ks = run.path.noise.kernels
    dm = ks.martingale_weights[:tau] * np.diff(run.path.noise.bm.values)[:tau]
    s = float(np.sum(sp.chi[:tau] * dm))
    expected = p.alpha * (sp.info[tau] - h) / h - p.sigma * s / h
    assert run.record.alpha_hat - p.alpha == pytest.approx(expected, abs=1e-10)
    bm = ModelParams(1.0, 1.0, x0=0.3, hurst=0.5)
    nominal = sequential_run(bm, 20.0, seed=9, max_T=200, dt=0.05, partial_last_cell=False)
    ref, _ = reference_sequential_bm(nominal.path.X, nominal.path.L, 0.05, 20.0, partial_last_cell=False)
    assert nominal.record.alpha_hat == pytest.approx(ref, abs=1e-10)


def test_sequential_reports_miss():
    p = ModelParams(1.0, 1.0, hurst=0.7)
    rec = sequential_mle(p, 1e6, seed=0, max_T=12.8, dt=0.1, alpha_true=1.0)
    assert not rec.hit
    assert rec.horizon_or_tau == pytest.approx(12.8)
    assert 0 < rec.info_used < 1e6
    assert math.isfinite(rec.standardized)


def test_sequential_is_deterministic():
    p = ModelParams(1.0, 1.0, hurst=0.7)
    a = sequential_mle(p, 10.0, seed=(4, 2), dt=0.1)
    b = sequential_mle(p, 10.0, seed=(4, 2), dt=0.1)
    assert a == b
    with pytest.raises(ParameterError):
        sequential_mle(p, 0.0, seed=0)


# ---------------------------------------------------------- likelihood ratios


def test_likelihood_ratios_at_zero_drift():
    p = ModelParams(1.0, 1.0, x0=0.5, hurst=0.7)
    path, ks = _path(p, n=128)
    assert likelihood_ratio_fm(path, 0.0).value == 1.0
    assert likelihood_ratio_kinv(path, 0.0).value == 1.0


def test_two_likelihood_ratio_routes_agree():
    p = ModelParams(1.0, 1.0, x0=0.5, hurst=0.7)
    ks = make_kernels(0.7, Grid(4.0, 1024))
    fm, kv = [], []
    for seed in range(20):
        path = simulate_rfou(p, sample_noise(ks, seed))
        fm.append(likelihood_ratio_fm(path, 1.0).log_value)
        kv.append(likelihood_ratio_kinv(path, 1.0).log_value)
    assert np.max(np.abs(np.array(fm) - np.array(kv))) < 0.05
    assert np.corrcoef(fm, kv)[0, 1] > 0.999


def test_likelihood_ratio_overflow_flag():
    assert LikelihoodRatio(800.0).overflow
    assert LikelihoodRatio(800.0).value == math.inf
    assert LikelihoodRatio(0.0).value == 1.0


def test_estimates_csv():
    buf = io.StringIO()
    write_estimates_csv(buf, [EstimateRecord(1.0, 2.0, 3.0, "sequential", False, 0.5)])
    lines = buf.getvalue().splitlines()
    assert lines == ["kind,alpha_hat,info_used,tau_or_T,hit,standardized", "sequential,1.0,2.0,3.0,false,0.5"]
