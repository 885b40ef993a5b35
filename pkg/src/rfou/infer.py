"""Drift estimation for the reflected fractional Ornstein-Uhlenbeck model.

The observation is transformed into a martingale problem.  With L the
lower-triangular map sending BM increments to fBm increments on the grid and
w_j the martingale weights (dM = w dW), put

    dX~ = w L^{-1} dX,   dL~ = w L^{-1} dL,   dPhi = w L^{-1} (X dt),

so that the Euler scheme reads dX~ = -alpha dPhi + sigma dM + dL~ exactly.
chi_j = dPhi_j / d<M>_j is predictable (it uses X up to the left node of cell
j), and the Gaussian log-likelihood of the path is

    -(alpha/sigma^2) sum chi (dX~ - dL~) - (alpha^2 / 2 sigma^2) sum chi^2 d<M>.

Every estimator below is built from these left-point sums.  The continuous-time
fractional-operator formula for chi and the kernel route for X~ are kept as
cross-checks (chi_operator_route, kernel_transform).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import gamma, sqrt

import numpy as np

from .errors import DegenerateEstimateError, ParameterError, StructuralError
from .fgn import KernelSet, NoisePair, _rng, fbm_from_bm, kh_inverse, make_kernels, whiten
from .fraccalc import Grid, SampledFn, frac_op_left, power_rule
from .reflect import ModelParams, RfouPath, simulate_rfou

__all__ = [
    "HURST_BAND",
    "SufficientProcess",
    "EstimateRecord",
    "LikelihoodRatio",
    "chi_process",
    "chi_operator_route",
    "kernel_transform",
    "log_likelihood",
    "mle",
    "sequential_mle",
    "sequential_run",
    "SequentialRun",
    "kinv_integrand",
    "likelihood_ratio_fm",
    "likelihood_ratio_kinv",
    "standardized_stat",
    "reference_mle_bm",
    "reference_sequential_bm",
    "write_estimates_csv",
]

HURST_BAND = (0.1, 0.9)


def _check_band(H: float):
    lo, hi = HURST_BAND
    if not lo <= H <= hi:
        raise ParameterError(f"estimators support H in [{lo}, {hi}], got {H}")


@dataclass(frozen=True)
class SufficientProcess:
    """chi at the n left nodes, the rest at all n+1 nodes."""

    grid: Grid
    chi: np.ndarray = field(repr=False)
    qv: np.ndarray = field(repr=False)
    info: np.ndarray = field(repr=False)
    xt_tilde: np.ndarray = field(repr=False)
    lt_tilde: np.ndarray = field(repr=False)

    @property
    def dqv(self) -> np.ndarray:
        return np.diff(self.qv)

    def score_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Running sums sum_{j<i} chi_j dX~_j and sum_{j<i} chi_j dL~_j at every node."""
        sx = np.concatenate(([0.0], np.cumsum(self.chi * np.diff(self.xt_tilde))))
        sl = np.concatenate(([0.0], np.cumsum(self.chi * np.diff(self.lt_tilde))))
        return sx, sl


@dataclass(frozen=True)
class EstimateRecord:
    alpha_hat: float
    info_used: float
    horizon_or_tau: float
    kind: str  # "mle" or "sequential"
    hit: bool = True
    standardized: float = float("nan")
    info_at_stop: float = float("nan")

    def __post_init__(self):
        for name in ("alpha_hat", "info_used", "horizon_or_tau", "standardized", "info_at_stop"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "hit", bool(self.hit))

    def row(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LikelihoodRatio:
    log_value: float

    @property
    def overflow(self) -> bool:
        return self.log_value > 709.0

    @property
    def value(self) -> float:
        return float("inf") if self.overflow else float(np.exp(self.log_value))


def _transformed(X: np.ndarray, L: np.ndarray, kernels: KernelSet):
    """(dX~, dL~, dPhi) for one path."""
    dt = kernels.grid.dt
    w = kernels.martingale_weights
    phi = np.concatenate(([0.0], np.cumsum(X[:-1]) * dt))
    stacked = whiten(np.stack([X, L, phi]), kernels)
    return w * stacked[0], w * stacked[1], w * stacked[2]


def chi_process(path: RfouPath, kernels: KernelSet) -> SufficientProcess:
    if path.grid != kernels.grid:
        raise StructuralError("path and kernels live on different grids")
    if path.params.hurst != kernels.hurst:
        raise StructuralError("path and kernels disagree on the Hurst index")
    _check_band(kernels.hurst)
    dx, dl, dphi = _transformed(path.X, path.L, kernels)
    qv = kernels.qv
    dqv = np.diff(qv)
    chi = dphi / dqv
    info = np.concatenate(([0.0], np.cumsum(chi * chi * dqv)))
    xt = np.concatenate(([0.0], np.cumsum(dx)))
    lt = np.concatenate(([0.0], np.cumsum(dl)))
    return SufficientProcess(kernels.grid, chi, qv, info, xt, lt)


def chi_operator_route(x: SampledFn, kernels: KernelSet) -> SampledFn:
    """chi_t = c_H t^{2H-1} D_{0+}^{H-1/2}(u^{1/2-H} x_u)(t), D of negative order read as I.

    c_H = Gamma(3/2-H) lambda_H / ((2-2H) kappa_H).  The constant part x(0)
    is handled with the power rule; node 0 gets its limit (H < 1/2) or the
    first-cell average of the singular term (H > 1/2).
    """
    H = kernels.hurst
    if x.grid != kernels.grid:
        raise StructuralError("path and kernels live on different grids")
    if kernels.is_brownian:
        return x
    c = gamma(1.5 - H) * kernels.lambda_H / ((2 - 2 * H) * kernels.kappa_H)
    t = x.times
    x0 = x.values[0]
    with np.errstate(divide="ignore"):
        weight = np.where(t > 0, t ** (0.5 - H), 0.0)
    rest = frac_op_left(SampledFn(x.grid, weight * (x.values - x0)), H - 0.5).values
    out = np.empty_like(t)
    tp = t[1:]
    lead = x0 * power_rule(tp, 0.5 - H, H - 0.5)
    out[1:] = c * tp ** (2 * H - 1) * (lead + rest[1:])
    # t^{2H-1} * t^{1-2H} is constant, so the limit at 0 is the constant part
    out[0] = c * x0 * gamma(1.5 - H) / gamma(2 - 2 * H)
    return SampledFn(x.grid, out)


def kernel_transform(y: SampledFn, kernels: KernelSet) -> SampledFn:
    """y~(t_i) = sum_j kbar(t_i, j) dy_j, the cell-averaged kernel route."""
    if y.grid != kernels.grid:
        raise StructuralError("path and kernels live on different grids")
    if kernels.is_brownian:
        return SampledFn(y.grid, y.values - y.values[0])
    return SampledFn(y.grid, kernels.k @ np.diff(y.values))


def log_likelihood(sp: SufficientProcess, alpha, sigma: float, upto: int | None = None):
    """Log of dP^alpha/dP^0 on the first `upto` cells (default all), vectorised in alpha."""
    n = len(sp.chi) if upto is None else upto
    chi = sp.chi[:n]
    a = np.asarray(alpha, dtype=float)
    s_x = float(np.sum(chi * np.diff(sp.xt_tilde)[:n]))
    s_l = float(np.sum(chi * np.diff(sp.lt_tilde)[:n]))
    info = sp.info[n]
    return (-a * (s_x - s_l) - 0.5 * a * a * info) / sigma**2


def standardized_stat(record: EstimateRecord, alpha_true: float, sigma: float) -> float:
    """(alpha_hat - alpha) sqrt(info_used) / sigma."""
    if not record.info_used > 0:
        raise DegenerateEstimateError("standardized statistic needs positive information")
    return (record.alpha_hat - alpha_true) * sqrt(record.info_used) / sigma


def mle(path: RfouPath, kernels: KernelSet | None = None, alpha_true: float | None = None) -> EstimateRecord:
    """Fixed-horizon MLE (sum chi dL~ - sum chi dX~) / sum chi^2 d<M>."""
    kernels = kernels or make_kernels(path.params.hurst, path.grid)
    sp = chi_process(path, kernels)
    sx, sl = sp.score_parts()
    info = float(sp.info[-1])
    if not info > 0:
        raise DegenerateEstimateError("observed information is zero; the path never left the barrier at 0")
    rec = EstimateRecord((sl[-1] - sx[-1]) / info, info, path.grid.horizon, "mle", True)
    if alpha_true is not None:
        rec = _with_standardized(rec, alpha_true, path.params.sigma)
    return rec


def _with_standardized(rec: EstimateRecord, alpha_true: float, sigma: float) -> EstimateRecord:
    d = rec.row()
    d["standardized"] = standardized_stat(rec, alpha_true, sigma)
    return EstimateRecord(**d)


@dataclass(frozen=True)
class SequentialRun:
    """A sequential estimate with the path and sufficient process it came from."""

    record: EstimateRecord
    path: RfouPath
    sufficient: SufficientProcess
    tau_index: int


def sequential_run(
    params: ModelParams,
    h: float,
    seed,
    max_T: float = 1000.0,
    dt: float = 0.05,
    start_T: float = 12.8,
    partial_last_cell: bool = True,
) -> SequentialRun:
    """Simulate until the observed information first reaches h.

    The BM increments come from one stream, and the horizon doubles until the
    threshold is crossed or max_T is reached; the kernel map is causal, so a
    longer horizon only appends to the path.  With partial_last_cell=False
    the sums stop at tau and are divided by the nominal h, which carries a
    one-step overshoot bias.
    """
    if not h > 0:
        raise ParameterError("h must be positive")
    if not (max_T > 0 and dt > 0):
        raise ParameterError("max_T and dt must be positive")
    _check_band(params.hurst)
    rng = _rng(seed)
    n_max = max(2, int(round(max_T / dt)))
    dw = rng.standard_normal(n_max) * sqrt(dt)
    n = min(n_max, max(2, int(round(start_T / dt))))
    while True:
        grid = Grid(n * dt, n)
        ks = make_kernels(params.hurst, grid)
        bm = SampledFn(grid, np.concatenate(([0.0], np.cumsum(dw[:n]))))
        noise = NoisePair(bm, fbm_from_bm(bm, ks), ks, seed)
        path = simulate_rfou(params, noise)
        sp = chi_process(path, ks)
        crossed = np.nonzero(sp.info >= h)[0]
        if len(crossed) or n == n_max:
            break
        n = min(2 * n, n_max)
    sx, sl = sp.score_parts()
    if len(crossed):
        tau = int(crossed[0])
        # the last cell enters with weight theta so the information used is h exactly;
        # theta depends only on chi at the left node, so the weights stay predictable
        before = float(sp.info[tau - 1])
        theta = (h - before) / (float(sp.info[tau]) - before) if partial_last_cell else 1.0
        num = (sl[tau - 1] - sx[tau - 1]) + theta * ((sl[tau] - sx[tau]) - (sl[tau - 1] - sx[tau - 1]))
        rec = EstimateRecord(num / h, h, float(grid.times[tau]), "sequential", True,
                             info_at_stop=float(sp.info[tau]))
    else:
        tau = n
        info = float(sp.info[-1])
        if not info > 0:
            raise DegenerateEstimateError("observed information stayed at zero up to max_T")
        rec = EstimateRecord((sl[-1] - sx[-1]) / info, info, grid.horizon, "sequential", False,
                             info_at_stop=info)
    return SequentialRun(rec, path, sp, tau)


def sequential_mle(
    params: ModelParams,
    h: float,
    seed,
    max_T: float = 1000.0,
    dt: float = 0.05,
    alpha_true: float | None = None,
    partial_last_cell: bool = True,
) -> EstimateRecord:
    """Sequential estimate (sum_{j<tau} chi dL~ - chi dX~) / h with tau the first node where info >= h.

    By default the last cell is weighted so the information used equals h
    exactly.  If max_T is reached first the record has hit=False and uses the
    information actually collected.
    """
    rec = sequential_run(params, h, seed, max_T, dt, partial_last_cell=partial_last_cell).record
    if alpha_true is not None:
        rec = _with_standardized(rec, alpha_true, params.sigma)
    return rec


def _noise_of(path: RfouPath) -> NoisePair:
    if path.noise is None:
        raise StructuralError("path carries no driving noise")
    return path.noise


def likelihood_ratio_fm(path: RfouPath, alpha: float, kernels: KernelSet | None = None) -> LikelihoodRatio:
    """eta_T = exp((alpha/sigma) sum chi dM - (alpha^2/2 sigma^2) sum chi^2 d<M>)."""
    noise = _noise_of(path)
    kernels = kernels or noise.kernels
    sp = chi_process(path, kernels)
    dm = kernels.martingale_weights * np.diff(noise.bm.values)
    s = path.params.sigma
    log_eta = alpha / s * float(np.sum(sp.chi * dm)) - 0.5 * (alpha / s) ** 2 * float(sp.info[-1])
    return LikelihoodRatio(log_eta)


def kinv_integrand(path: RfouPath, kernels: KernelSet | None = None) -> np.ndarray:
    """(K_H^{-1} int_0^. X dr)(t_j) at the n left nodes."""
    kernels = kernels or _noise_of(path).kernels
    dt = path.grid.dt
    phi = np.concatenate(([0.0], np.cumsum(path.X[:-1]) * dt))
    return kh_inverse(SampledFn(path.grid, phi), kernels).values[:-1]


def likelihood_ratio_kinv(path: RfouPath, alpha: float, kernels: KernelSet | None = None) -> LikelihoodRatio:
    """xi_T = exp(int g dW - 1/2 int g^2 ds) with g = K_H^{-1}(int (alpha/sigma) X dr)."""
    noise = _noise_of(path)
    g = alpha / path.params.sigma * kinv_integrand(path, kernels)
    dw = np.diff(noise.bm.values)
    log_xi = float(np.sum(g * dw)) - 0.5 * float(np.sum(g * g)) * path.grid.dt
    return LikelihoodRatio(log_xi)


def reference_mle_bm(X, L, dt: float) -> float:
    """Brownian-case MLE (int X dL - int X dX) / int X^2 dt with plain left-point loops."""
    num = 0.0
    den = 0.0
    for j in range(len(X) - 1):
        num += X[j] * (L[j + 1] - L[j]) - X[j] * (X[j + 1] - X[j])
        den += X[j] * X[j] * dt
    return num / den


def reference_sequential_bm(X, L, dt: float, h: float, partial_last_cell: bool = True) -> tuple[float, int]:
    """Brownian-case sequential estimate: stop once int X^2 dt reaches h, last cell weighted to hit h."""
    num = 0.0
    den = 0.0
    for j in range(len(X) - 1):
        step = X[j] * (L[j + 1] - L[j]) - X[j] * (X[j + 1] - X[j])
        gain = X[j] * X[j] * dt
        if den + gain >= h:
            theta = (h - den) / gain if partial_last_cell else 1.0
            return (num + theta * step) / h, j + 1
        num += step
        den += gain
    return num / den, len(X) - 1


def write_estimates_csv(fh, records):
    """CSV with header kind,alpha_hat,info_used,tau_or_T,hit,standardized."""
    fh.write("kind,alpha_hat,info_used,tau_or_T,hit,standardized\n")
    for r in records:
        fh.write(
            f"{r.kind},{r.alpha_hat!r},{r.info_used!r},{r.horizon_or_tau!r},"
            f"{str(bool(r.hit)).lower()},{r.standardized!r}\n"
        )
