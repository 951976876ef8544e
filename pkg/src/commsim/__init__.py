"""Simulation of distribution estimation under b-bit communication limits."""
from .distributions import (
    ComplexityProfile,
    Distribution,
    complexity_profile,
    geometric,
    make_distribution,
    norm_q,
    point_mass,
    renyi_entropy_half,
    sample,
    sparse_random,
    uniform,
    zipf,
)
from .estimators import LocalizeRefineEstimator, UniformGroupingEstimator
from .evaluation import bound_thm1, bound_thm2, monte_carlo
from .exceptions import CommsimError, ConfigurationError, DomainError, ProtocolViolation
from .protocol import SchemeConfig, run_localize_refine, run_scheme, verify_transcript
from .round1 import run_minimax_baseline

__version__ = "0.1.0"
