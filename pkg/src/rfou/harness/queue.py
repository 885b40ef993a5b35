"""Heavy-traffic queue with abandonment, driven by fBm arrival counts.

Arrival counts follow the Gaussian functional limit directly,
A(k) = round(k + sigma N^H W^H(k/N)), with unit arrival and service rates.
Each step the server removes one customer if any is waiting and every waiting
customer leaves independently with probability alpha/N.  The scaled queue
Q(N t) / N^H is compared with the reflected OU process driven by the same W^H.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError

__all__ = ["arrival_counts", "simulate_queue", "scaled_queue"]


def arrival_counts(wh_at_k_over_n: np.ndarray, N: int, sigma: float, H: float) -> np.ndarray:
    """Cumulative counts A(k), k = 0..len-1, from W^H sampled at k/N.

    Rounding the Gaussian limit can make single increments negative; they are
    kept, since the count process is only matched in distribution at scale N^H.
    """
    k = np.arange(len(wh_at_k_over_n), dtype=float)
    return np.rint(k + sigma * N**H * np.asarray(wh_at_k_over_n))


def simulate_queue(arrivals: np.ndarray, N: int, alpha: float, q0: int, rng, mu: float = 1.0) -> np.ndarray:
    """Queue length after each unit-time step, Q(0) = q0."""
    if alpha < 0:
        raise ParameterError("abandonment needs alpha >= 0")
    p_leave = alpha / N
    if p_leave > 1:
        raise ParameterError("alpha / N must not exceed 1")
    steps = len(arrivals) - 1
    q = np.empty(steps + 1)
    q[0] = q0
    da = np.diff(arrivals)
    cur = float(q0)
    for i in range(steps):
        gone = rng.binomial(int(cur), p_leave) if p_leave > 0 and cur > 0 else 0
        cur = max(0.0, cur + da[i] - mu - gone)
        q[i + 1] = cur
    return q


def scaled_queue(q: np.ndarray, N: int, H: float) -> np.ndarray:
    return q / N**H
