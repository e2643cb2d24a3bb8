"""Two-stage robust transmission expansion planning under budgeted uncertainty."""

__version__ = "0.1.0"

from .grid import GridCase, load_case, validate  # noqa: E402
from .uncertainty import Budgets, Realization, realize  # noqa: E402
from .recourse import ExpansionPlan, solve_dispatch  # noqa: E402
from .pccg import SolveConfig, deterministic_plan, solve_robust_tnep  # noqa: E402

__all__ = [
    "Budgets", "ExpansionPlan", "GridCase", "Realization", "SolveConfig", "deterministic_plan", "load_case",
    "realize", "solve_dispatch", "solve_robust_tnep", "validate",
]
