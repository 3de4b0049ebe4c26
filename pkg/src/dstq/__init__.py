"""Directed Steiner tree via label-consistent subtrees, lifted LPs and rounding."""

from .errors import (
    CapExceeded,
    DstqError,
    InfeasibleError,
    RetryCapExhausted,
    StageError,
    ValidationError,
)
from .graph import DstInstance, SteinerSolution, metric_closure, parse_dst, validate_solution
from .oracle import exact_opt
from .pipeline import PipelineConfig, RunReport, run_approx, run_lp_bound

__version__ = "0.1.0"

__all__ = [
    "CapExceeded",
    "DstInstance",
    "DstqError",
    "InfeasibleError",
    "PipelineConfig",
    "RetryCapExhausted",
    "RunReport",
    "StageError",
    "SteinerSolution",
    "ValidationError",
    "exact_opt",
    "metric_closure",
    "parse_dst",
    "run_approx",
    "run_lp_bound",
    "validate_solution",
]
