"""Problem containers and result types for the linear-optimization core."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf

EQ, LE, GE = "=", "<=", ">="
_SENSES = (EQ, LE, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    pass


class NumericalError(SolverError):
    """Raised when the simplex cannot reach an accurate answer."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class Tolerances:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    duality_gap_tol: float = 1e-9
    mip_gap_tol: float = 1e-8
    int_tol: float = 1e-6
    pivot_tol: float = 1e-9
    max_iter: int = 500_000

    def __post_init__(self):
        for name in ("feas_tol", "opt_tol", "duality_gap_tol", "mip_gap_tol", "int_tol", "pivot_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


class LinearProgram:
    """Minimize ``c @ x`` subject to named rows ``a @ x (=|<=|>=) b`` and bounds.

    Rows and variables are appended through :meth:`add_var` and :meth:`add_row`;
    indices are returned so callers can keep their own bookkeeping.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.cost: list[float] = []
        self.row_names: list[str] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self._ri: list[int] = []
        self._ci: list[int] = []
        self._v: list[float] = []
        self._matrix = None

    @property
    def num_vars(self) -> int:
        return len(self.cost)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, cost: float = 0.0) -> int:
        lb, ub, cost = float(lb), float(ub), float(cost)
        if math.isnan(lb) or math.isnan(ub) or lb > ub or lb == INF or ub == -INF:
            raise ValueError(f"inconsistent bounds for {name}: [{lb}, {ub}]")
        if not math.isfinite(cost):
            raise ValueError(f"non-finite cost for {name}")
        self.var_names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.cost.append(cost)
        self._matrix = None
        return len(self.cost) - 1

    def add_row(self, name: str, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                sense: str, rhs: float) -> int:
        if sense not in _SENSES:
            raise ValueError(f"unknown row sense {sense!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError(f"non-finite right-hand side in row {name}")
        r = len(self.rhs)
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            a = float(a)
            if not math.isfinite(a):
                raise ValueError(f"non-finite coefficient in row {name}")
            if not 0 <= j < len(self.cost):
                raise IndexError(f"row {name} references unknown variable {j}")
            if a != 0.0:
                self._ri.append(r)
                self._ci.append(j)
                self._v.append(a)
        self.row_names.append(name)
        self.senses.append(sense)
        self.rhs.append(rhs)
        self._matrix = None
        return r

    def set_bounds(self, j: int, lb: float, ub: float) -> None:
        if lb > ub:
            raise ValueError(f"inconsistent bounds for {self.var_names[j]}: [{lb}, {ub}]")
        self.lb[j] = float(lb)
        self.ub[j] = float(ub)

    def set_rhs(self, r: int, value: float) -> None:
        self.rhs[r] = float(value)

    def set_cost(self, j: int, value: float) -> None:
        self.cost[j] = float(value)

    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix (duplicates summed)."""
        if self._matrix is None:
            self._matrix = sp.csr_matrix(
                (np.asarray(self._v, dtype=float), (np.asarray(self._ri, dtype=np.int64),
                                                     np.asarray(self._ci, dtype=np.int64))),
                shape=(self.num_rows, self.num_vars),
            )
            self._matrix.sum_duplicates()
        return self._matrix

    def copy(self) -> "LinearProgram":
        other = LinearProgram(self.name)
        for attr in ("var_names", "lb", "ub", "cost", "row_names", "senses", "rhs", "_ri", "_ci", "_v"):
            setattr(other, attr, list(getattr(self, attr)))
        return other

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.asarray(self.rhs, dtype=float)
        senses = np.asarray(self.senses)
        lo = np.where(senses == LE, -INF, rhs)
        hi = np.where(senses == GE, INF, rhs)
        return lo, hi

    @classmethod
    def from_arrays(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None) -> "LinearProgram":
        """Convenience constructor mirroring the usual dense array interface."""
        c = np.asarray(c, dtype=float)
        lp = cls()
        n = len(c)
        if bounds is None:
            bounds = [(0.0, INF)] * n
        for j in range(n):
            lo, hi = bounds[j]
            lp.add_var(f"x{j}", -INF if lo is None else lo, INF if hi is None else hi, c[j])
        for A, b, sense, tag in ((A_ub, b_ub, LE, "ub"), (A_eq, b_eq, EQ, "eq")):
            if A is None:
                continue
            A = np.atleast_2d(np.asarray(A, dtype=float))
            for i, row in enumerate(A):
                lp.add_row(f"{tag}{i}", {j: a for j, a in enumerate(row) if a}, sense, b[i])
        return lp


@dataclass
class Basis:
    """Warm-start information: basic column per row plus nonbasic bound status.

    Columns ``0..n-1`` are structural variables, ``n..n+m-1`` the row logicals.
    """

    basic: np.ndarray
    status: np.ndarray

    def copy(self) -> "Basis":
        return Basis(self.basic.copy(), self.status.copy())


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0
    basis: Basis | None = None
    infeasible_rows: tuple[int, ...] = ()
    dual_objective: float = math.nan

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class MixedIntegerProgram:
    lp: LinearProgram
    binaries: list[int] = field(default_factory=list)

    def __post_init__(self):
        for j in self.binaries:
            if self.lp.lb[j] < 0 or self.lp.ub[j] > 1:
                raise ValueError(f"binary variable {self.lp.var_names[j]} has bounds outside [0, 1]")


@dataclass
class MipSolution:
    status: str
    x: np.ndarray | None
    objective: float
    best_bound: float
    nodes: int = 0
    lp_iterations: int = 0

    @property
    def abs_gap(self) -> float:
        return self.objective - self.best_bound

    @property
    def rel_gap(self) -> float:
        return relative_gap(self.objective, self.best_bound)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def relative_gap(incumbent: float, bound: float) -> float:
    """Gap between an incumbent and a bound, relative to ``max(|incumbent|, 1)``."""
    if not math.isfinite(incumbent):
        return INF
    return max(incumbent - bound, 0.0) / max(abs(incumbent), 1.0)


class MipLimitError(SolverError):
    """Node or time limit reached; ``solution`` carries incumbent and bound."""

    def __init__(self, message: str, solution: MipSolution):
        super().__init__(message)
        self.solution = solution
