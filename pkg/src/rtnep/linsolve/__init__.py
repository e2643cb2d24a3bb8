"""Deterministic LP/MIP core used by every model in the package."""

from .model import (
    EQ, GE, INF, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, Basis, LinearProgram, LpSolution,
    MipLimitError, MipSolution, MixedIntegerProgram, NumericalError, SolverError, Tolerances,
    relative_gap,
)
from .simplex import solve_lp

__all__ = [
    "EQ", "GE", "INF", "INFEASIBLE", "LE", "OPTIMAL", "UNBOUNDED", "Basis", "LinearProgram",
    "LpSolution", "MipLimitError", "MipSolution", "MixedIntegerProgram", "NumericalError",
    "SolverError", "Tolerances", "relative_gap", "solve_lp",
]

from .mip import solve_mip  # noqa: E402
from .mps import to_mps, write_mps  # noqa: E402

__all__ += ["solve_mip", "to_mps", "write_mps"]
