"""Base relaxation, lifting, exact simplex and lifted-solution oracles."""

from .lifted import DistributionBacked, LiftedSolution, SaLpSolution, required_rounds
from .program import EventSpace, LinearProgram, build_base_lp, lift
from .simplex import LpResult, solve_lp

__all__ = [
    "DistributionBacked",
    "EventSpace",
    "LiftedSolution",
    "LinearProgram",
    "LpResult",
    "SaLpSolution",
    "build_base_lp",
    "lift",
    "required_rounds",
    "solve_lp",
]
