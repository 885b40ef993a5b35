"""Monte Carlo suites: sequential plan, fixed-horizon MLE, likelihood ratios, queue demo.

Replication i draws its randomness from SeedSequence(root, spawn_key=(i, ...)),
so results do not depend on how replications are spread over workers.  All
summaries are computed from the stored rows by `summarize`.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ..errors import DegenerateEstimateError, NumericalError, ParameterError
from ..fgn import NoisePair, fbm_from_bm, make_kernels, sample_noise
from ..fraccalc import Grid, SampledFn
from ..infer import (
    likelihood_ratio_fm,
    likelihood_ratio_kinv,
    mle,
    reference_mle_bm,
    sequential_mle,
)
from ..reflect import simulate_rfou
from .config import ExperimentConfig
from .queue import arrival_counts, scaled_queue, simulate_queue
from .stats import ks_test, median, moments

__all__ = [
    "ExperimentReport",
    "run_sequential_suite",
    "run_mle_suite",
    "run_girsanov_suite",
    "queue_scaling_demo",
    "run_experiment",
    "summarize",
]

REP_ERRORS = (DegenerateEstimateError, NumericalError, ParameterError, FloatingPointError)


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    records: list
    summary: dict
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def payload(self, with_clock: bool = True) -> dict:
        d = {
            "kind": self.kind,
            "config": self.config,
            "summary": self.summary,
            "checks": self.checks,
            "notes": self.notes,
            "records": self.records,
        }
        if with_clock:
            d["wall_clock_s"] = self.wall_clock_s
        return _clean(d)

    def to_json(self, with_clock: bool = True) -> str:
        return json.dumps(self.payload(with_clock), sort_keys=True, indent=1)

    def check_lines(self) -> list[str]:
        return [f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}" for c in self.checks]


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _seed(cfg: ExperimentConfig, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=tuple(int(k) for k in key))


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _finish(kind, cfg, rows, started, notes=()) -> ExperimentReport:
    rows = _clean(rows)
    summary, checks = summarize(kind, rows, cfg)
    return ExperimentReport(kind, cfg.echo(), rows, summary, checks, list(notes), time.perf_counter() - started)


# ---------------------------------------------------------------- replications


def _sequential_rep(cfg: ExperimentConfig, idx: int) -> dict:
    try:
        rec = sequential_mle(cfg.model, cfg.h_level, _seed(cfg, idx), cfg.max_horizon, cfg.dt, alpha_true=cfg.alpha)
    except REP_ERRORS as exc:
        return {"rep": idx, "error": str(exc)}
    return {"rep": idx, **rec.row()}


def _mle_rep(cfg: ExperimentConfig, horizons: tuple, idx: int) -> list[dict]:
    rows = []
    for T in horizons:
        n = max(2, int(round(T / cfg.dt)))
        ks = make_kernels(cfg.hurst, Grid(T, n))
        noise = sample_noise(ks, np.random.default_rng(_seed(cfg, idx)))
        path = simulate_rfou(cfg.model, noise)
        try:
            rec = mle(path, ks, alpha_true=cfg.alpha)
        except REP_ERRORS as exc:
            rows.append({"rep": idx, "T": T, "error": str(exc)})
            continue
        row = {"rep": idx, "T": T, **rec.row()}
        if ks.is_brownian:
            row["reference_alpha_hat"] = reference_mle_bm(path.X, path.L, ks.grid.dt)
        rows.append(row)
    return rows


def _girsanov_rep(cfg: ExperimentConfig, idx: int) -> dict:
    ks = make_kernels(cfg.hurst, Grid(cfg.horizon, cfg.steps))
    path = simulate_rfou(cfg.model, sample_noise(ks, np.random.default_rng(_seed(cfg, idx))))
    eta = likelihood_ratio_fm(path, cfg.alpha, ks)
    xi = likelihood_ratio_kinv(path, cfg.alpha, ks)
    return {"rep": idx, "log_eta": eta.log_value, "eta": eta.value, "log_xi": xi.log_value, "xi": xi.value}


def _refine_rep(cfg: ExperimentConfig, idx: int) -> dict:
    """|log xi - log eta| on one BM path seen at n and 2n steps."""
    n = cfg.steps
    fine = Grid(cfg.horizon, 2 * n)
    dw = np.random.default_rng(_seed(cfg, idx, 1)).standard_normal(2 * n) * math.sqrt(fine.dt)
    w = np.concatenate(([0.0], np.cumsum(dw)))
    out = {"rep": idx}
    for label, m in (("coarse", n), ("fine", 2 * n)):
        ks = make_kernels(cfg.hurst, Grid(cfg.horizon, m))
        bm = SampledFn(ks.grid, w[:: (2 * n) // m])
        path = simulate_rfou(cfg.model, NoisePair(bm, fbm_from_bm(bm, ks), ks))
        gap = likelihood_ratio_kinv(path, cfg.alpha, ks).log_value - likelihood_ratio_fm(path, cfg.alpha, ks).log_value
        out[label] = abs(gap)
    return out


def _queue_rep(cfg: ExperimentConfig, fine_steps: int, idx: int) -> dict:
    H, T = cfg.hurst, cfg.horizon
    ks = make_kernels(H, Grid(T, fine_steps))
    noise = sample_noise(ks, np.random.default_rng(_seed(cfg, idx)))
    path = simulate_rfou(cfg.model, noise)
    row = {"rep": idx, "rfou_T": path.X[-1]}
    wh = noise.fbm.values
    for N in cfg.queue_sizes:
        stride = fine_steps // int(round(N * T))
        arrivals = arrival_counts(wh[::stride], N, cfg.sigma, H)
        q0 = int(round(cfg.x0 * N**H))
        q = simulate_queue(arrivals, N, cfg.alpha, q0, np.random.default_rng(_seed(cfg, idx, 1, N)))
        row[f"queue_T_{N}"] = scaled_queue(q, N, H)[-1]
    return row


# -------------------------------------------------------------------- summaries


def summarize(kind: str, rows: list, cfg: ExperimentConfig) -> tuple[dict, list]:
    """Summary and PASS/FAIL checks recomputed from the stored rows."""
    if kind == "sequential":
        return _summarize_sequential(rows, cfg)
    if kind in ("consistency", "normality"):
        return _summarize_mle(rows, cfg)
    if kind == "girsanov":
        return _summarize_girsanov(rows, cfg)
    if kind == "queue-demo":
        return _summarize_queue(rows, cfg)
    raise ParameterError(f"unknown kind {kind!r}")


def _summarize_sequential(rows, cfg):
    ok = [r for r in rows if "error" not in r]
    hits = [r for r in ok if r["hit"]]
    m = moments([r["alpha_hat"] for r in ok], cfg.alpha)
    s = dict(m)
    s["errors"] = len(rows) - len(ok)
    s["hit_fraction"] = len(hits) / len(rows)
    s["target_mse"] = cfg.sigma**2 / cfg.h_level
    s["mse_ratio"] = m["mse"] / s["target_mse"] if ok else None
    std = [r["standardized"] for r in hits]
    s["ks_stat"], s["ks_p"] = ks_test(std) if len(std) > 1 else (None, None)
    checks = [
        _check("hit fraction", s["hit_fraction"] == 1.0, f"{s['hit_fraction']:.4f} of runs reached h"),
    ]
    if ok:
        checks += [
            _check("unbiased", abs(m["bias"]) <= 3 * m["se"], f"bias {m['bias']:.5f}, 3*SE {3 * m['se']:.5f}"),
            _check("MSE vs sigma^2/h", abs(s["mse_ratio"] - 1) <= 0.15, f"MSE*h/sigma^2 = {s['mse_ratio']:.4f}"),
        ]
    if s["ks_p"] is not None:
        checks.append(_check("normality", s["ks_p"] > 0.01, f"KS p = {s['ks_p']:.4f}"))
    return s, checks


def _summarize_mle(rows, cfg):
    ok = [r for r in rows if "error" not in r]
    horizons = sorted({r["T"] for r in rows})
    per_T = {}
    for T in horizons:
        sel = [r for r in ok if r["T"] == T]
        est = moments([r["alpha_hat"] for r in sel], cfg.alpha)
        est["median_abs_error"] = median([abs(r["alpha_hat"] - cfg.alpha) for r in sel])
        per_T[repr(T)] = est
    s = {"errors": len(rows) - len(ok), "per_horizon": per_T}
    checks = []
    meds = [per_T[repr(T)]["median_abs_error"] for T in horizons]
    if len(horizons) > 1:
        dec = all(b < a for a, b in zip(meds, meds[1:]))
        checks.append(_check("median error decreasing", dec, ", ".join(f"T={T:g}: {v:.4f}" for T, v in zip(horizons, meds))))
    last = [r["standardized"] for r in ok if r["T"] == horizons[-1]]
    s["ks_stat"], s["ks_p"] = ks_test(last)
    checks.append(_check(f"normality at T={horizons[-1]:g}", s["ks_p"] > 0.01, f"KS p = {s['ks_p']:.4f}"))
    refs = [abs(r["alpha_hat"] - r["reference_alpha_hat"]) for r in ok if "reference_alpha_hat" in r]
    if refs:
        s["max_reference_gap"] = max(refs)
        checks.append(_check("matches Brownian reference", max(refs) < 1e-10, f"max gap {max(refs):.2e}"))
    return s, checks


def _summarize_girsanov(rows, cfg):
    main = [r for r in rows if "eta" in r]
    ref = [r for r in rows if "coarse" in r]
    eta = moments([r["eta"] for r in main if r["eta"] is not None], 1.0)
    xi = moments([r["xi"] for r in main if r["xi"] is not None], 1.0)
    s = {"eta": eta, "xi": xi, "overflow": sum(r["eta"] is None for r in main)}
    checks = [_check("E[eta] = 1", abs(eta["bias"]) <= 3 * eta["se"], f"mean {eta['mean']:.5f}, 3*SE {3 * eta['se']:.5f}")]
    zero = [r for r in rows if "eta_at_zero" in r]
    if zero:
        exact = all(r["eta_at_zero"] == 1.0 and r["xi_at_zero"] == 1.0 for r in zero)
        checks.append(_check("alpha = 0 gives 1", exact, f"eta, xi = {zero[0]['eta_at_zero']!r}, {zero[0]['xi_at_zero']!r}"))
    if ref:
        c = math.sqrt(math.fsum(r["coarse"] ** 2 for r in ref) / len(ref))
        f = math.sqrt(math.fsum(r["fine"] ** 2 for r in ref) / len(ref))
        s["refinement"] = {"steps": cfg.steps, "rms_coarse": c, "rms_fine": f, "ratio": c / f}
        checks.append(_check("log xi - log eta refines", c / f >= 1.3, f"RMS gap {c:.2e} -> {f:.2e}, ratio {c / f:.3f}"))
    return s, checks


def _summarize_queue(rows, cfg):
    ref = [r["rfou_T"] for r in rows]
    dist = {}
    for N in cfg.queue_sizes:
        stat, p = ks_test([r[f"queue_T_{N}"] for r in rows], ref)
        dist[str(N)] = {"ks_stat": stat, "p": p}
    d = [dist[str(N)]["ks_stat"] for N in cfg.queue_sizes]
    s = {"ks_distance": dist, "rfou_mean": moments(ref)["mean"]}
    ok = all(b <= a for a, b in zip(d, d[1:]))
    checks = [_check("KS distance non-increasing in N", ok, ", ".join(f"N={N}: {v:.4f}" for N, v in zip(cfg.queue_sizes, d)))]
    return s, checks


# ----------------------------------------------------------------------- suites


def run_sequential_suite(cfg: ExperimentConfig) -> ExperimentReport:
    started = time.perf_counter()
    rows = _map(partial(_sequential_rep, cfg), list(range(cfg.reps)), cfg.workers)
    return _finish("sequential", cfg, rows, started)


def run_mle_suite(cfg: ExperimentConfig) -> ExperimentReport:
    """Fixed-horizon MLE over the T-ladder (consistency) or at cfg.horizon (normality)."""
    started = time.perf_counter()
    horizons = cfg.horizons if cfg.kind == "consistency" else (cfg.horizon,)
    per_rep = _map(partial(_mle_rep, cfg, horizons), list(range(cfg.reps)), cfg.workers)
    rows = [r for group in per_rep for r in group]
    kind = cfg.kind if cfg.kind in ("consistency", "normality") else "consistency"
    return _finish(kind, cfg, rows, started)


def run_girsanov_suite(cfg: ExperimentConfig) -> ExperimentReport:
    started = time.perf_counter()
    rows = _map(partial(_girsanov_rep, cfg), list(range(cfg.reps)), cfg.workers)
    ks = make_kernels(cfg.hurst, Grid(cfg.horizon, cfg.steps))
    path = simulate_rfou(cfg.model, sample_noise(ks, np.random.default_rng(_seed(cfg, 0))))
    rows.append({
        "rep": -1,
        "eta_at_zero": likelihood_ratio_fm(path, 0.0, ks).value,
        "xi_at_zero": likelihood_ratio_kinv(path, 0.0, ks).value,
    })
    rows += _map(partial(_refine_rep, cfg), list(range(cfg.refine_paths)), cfg.workers)
    return _finish("girsanov", cfg, rows, started)


def queue_scaling_demo(cfg: ExperimentConfig) -> ExperimentReport:
    started = time.perf_counter()
    T = cfg.horizon
    n_max = max(cfg.queue_sizes)
    for N in cfg.queue_sizes:
        if abs(N * T - round(N * T)) > 1e-9:
            raise ParameterError("N * horizon must be an integer for every queue size")
    fine_steps = int(round(2 * n_max * T))
    if fine_steps > 4096:
        raise ParameterError("queue demo limited to 2 * max(N) * horizon <= 4096 fine steps")
    if any(fine_steps % int(round(N * T)) for N in cfg.queue_sizes):
        raise ParameterError("queue sizes must divide the fine grid")
    rows = _map(partial(_queue_rep, cfg, fine_steps), list(range(cfg.reps)), cfg.workers)
    notes = [
        "arrival counts use the Gaussian functional limit with rounding, not a renewal process",
        "abandonment probability per customer and step is alpha/N; unit arrival and service rates",
    ]
    return _finish("queue-demo", cfg, rows, started, notes)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.kind == "sequential":
        return run_sequential_suite(cfg)
    if cfg.kind in ("consistency", "normality"):
        return run_mle_suite(cfg)
    if cfg.kind == "girsanov":
        return run_girsanov_suite(cfg)
    return queue_scaling_demo(cfg)
