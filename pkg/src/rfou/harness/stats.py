"""Summary statistics that do not depend on the order of the replications."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

__all__ = ["ks_test", "moments", "median"]


def ks_test(sample, reference="std-normal") -> tuple[float, float]:
    """KS statistic and asymptotic p-value against N(0, 1) or a second sample."""
    x = np.asarray(sample, dtype=float)
    if isinstance(reference, str):
        if reference != "std-normal":
            raise ValueError(f"unknown reference {reference!r}")
        res = stats.kstest(x, stats.norm.cdf, method="asymp")
    else:
        res = stats.ks_2samp(x, np.asarray(reference, dtype=float), method="asymp")
    return float(res.statistic), float(res.pvalue)


def moments(values, target: float = 0.0) -> dict:
    """Mean, standard error, variance and mean squared error about target.

    Sums are exactly rounded (math.fsum), so the result is permutation invariant.
    """
    v = [float(x) for x in values]
    n = len(v)
    if n == 0:
        return {"n": 0}
    mean = math.fsum(v) / n
    var = math.fsum((x - mean) ** 2 for x in v) / (n - 1) if n > 1 else 0.0
    mse = math.fsum((x - target) ** 2 for x in v) / n
    return {
        "n": n,
        "mean": mean,
        "bias": mean - target,
        "variance": var,
        "se": math.sqrt(var / n),
        "mse": mse,
    }


def median(values) -> float:
    return float(np.median(np.asarray(values, dtype=float)))
