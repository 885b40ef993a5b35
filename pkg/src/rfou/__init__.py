"""Simulation and drift estimation for reflected fractional Ornstein-Uhlenbeck processes."""

from .errors import (
    DegenerateEstimateError,
    NumericalError,
    ParameterError,
    RejectedInputError,
    StructuralError,
)
from .fgn import KernelSet, NoisePair, make_kernels, sample_noise
from .fraccalc import Grid, SampledFn, SamplePath
from .infer import EstimateRecord, chi_process, mle, sequential_mle
from .reflect import ModelParams, RfouPath, simulate_fou, simulate_rfou

__version__ = "0.1.0"
