"""Sequential importance sampling for counting 0/1 tables with fixed margins."""
from ._jit import backend
from .errors import (
    ConfigError,
    InfeasibleInstance,
    SisError,
    TooLarge,
)
from .estimator import EstimatorParams, RunningEstimate, run_fixed, run_until_stop
from .exact_count import brute_force_count, count_one_heavy, count_two_heavy, dp_count
from .margins import (
    Margins,
    gale_ryser_feasible,
    make_one_heavy,
    make_regular,
    make_two_heavy,
    validate_margins,
)
from .sampler import Ordering, Orientation, SamplerConfig, Variant, run_trial

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EstimatorParams", "InfeasibleInstance", "Margins", "Ordering",
    "Orientation", "RunningEstimate", "SamplerConfig", "SisError", "TooLarge", "Variant",
    "backend", "brute_force_count", "count_one_heavy", "count_two_heavy", "dp_count",
    "gale_ryser_feasible", "make_one_heavy", "make_regular", "make_two_heavy", "run_fixed",
    "run_trial", "run_until_stop", "validate_margins",
]
