"""Monte Carlo suites, statistical checks, the queue demo and the command line."""

from .config import ExperimentConfig
from .stats import ks_test
from .suites import (
    ExperimentReport,
    queue_scaling_demo,
    run_experiment,
    run_girsanov_suite,
    run_mle_suite,
    run_sequential_suite,
    summarize,
)
