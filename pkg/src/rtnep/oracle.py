"""Brute-force references for small instances.

``exact_worst_case`` scans every vertex of the uncertainty set; ``exact_robust_plan``
scans every plan within the investment budget and takes the cheapest
investment plus weighted exact worst-case cost.  Ties keep the first item in
lexicographic order, so results are deterministic.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

from .grid import GridCase
from .linsolve import INF, Tolerances
from .recourse import DispatchModel, ExpansionPlan
from .uncertainty import Budgets, Realization, VertexCapError, enumerate_vertices, vertex_count

TIE_TOL = 1e-9


class OracleCapError(ValueError):
    def __init__(self, what: str, count: int, cap: int):
        super().__init__(f"{count} {what} exceed the oracle cap of {cap}")
        self.what = what
        self.count = count
        self.cap = cap


class OracleTimeError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_vertices: int = 1_000_000
    max_plans: int = 1 << 20
    time_limit: float = INF

    def __post_init__(self):
        if self.max_vertices <= 0 or self.max_plans <= 0 or not self.time_limit > 0:
            raise ValueError("oracle limits must be positive")


def _better(a: float, b: float) -> bool:
    """``a`` beats ``b`` by more than round-off."""
    return a > b + TIE_TOL * (1.0 + abs(b))


def _check_vertices(case: GridCase, budgets: Budgets, cap: int) -> None:
    n = vertex_count(case, budgets)
    if n > cap:
        raise OracleCapError("uncertainty vertices", n, cap)


def exact_worst_case(case: GridCase, plan: ExpansionPlan, budgets: Budgets, cap: int = 1_000_000,
                     tol: Tolerances | None = None, model: DispatchModel | None = None) -> tuple[Realization, float]:
    budgets.check(case)
    _check_vertices(case, budgets, cap)
    model = model or DispatchModel(case, plan, tol)
    best_r, best_c = None, -INF
    try:
        for r in enumerate_vertices(case, budgets, cap):
            c = model.solve(r).operating_cost
            if best_r is None or _better(c, best_c):
                best_r, best_c = r, c
    except VertexCapError as exc:
        raise OracleCapError("uncertainty vertices", exc.count, exc.cap) from exc
    return best_r, best_c


def feasible_plans(case: GridCase, cap: int = 1 << 20):
    """Budget-feasible plans in lexicographic order of the build vector."""
    n = len(case.candidates)
    if 2 ** n > cap:
        raise OracleCapError("candidate plans", 2 ** n, cap)
    costs = case.candidate_costs
    for bits in itertools.product((0, 1), repeat=n):
        inv = float(sum(c for c, b in zip(costs, bits) if b))
        if inv <= case.investment_budget * (1 + 1e-12) + 1e-12:
            yield ExpansionPlan.from_vector(case, bits)


def exact_robust_plan(case: GridCase, budgets: Budgets, caps: OracleBudget = OracleBudget(),
                      tol: Tolerances | None = None) -> tuple[ExpansionPlan, float]:
    """Cheapest plan by investment plus weighted exact worst-case operating cost.

    A plan is abandoned as soon as its running worst case shows it cannot beat
    the incumbent; the incumbent's worst vertex is tried first because it
    usually settles that quickly.
    """
    budgets.check(case)
    _check_vertices(case, budgets, caps.max_vertices)
    vertices = list(enumerate_vertices(case, budgets, caps.max_vertices))
    deadline = time.monotonic() + caps.time_limit
    best_plan, best_total, best_vertex = None, INF, 0
    for plan in feasible_plans(case, caps.max_plans):
        if time.monotonic() > deadline:
            raise OracleTimeError("oracle time limit exceeded")
        if best_plan is not None and not _better(best_total, plan.investment_cost):
            continue
        model = DispatchModel(case, plan, tol)
        worst, worst_at, pruned = -INF, 0, False
        order = [best_vertex] + [i for i in range(len(vertices)) if i != best_vertex]
        for i in order:
            c = model.solve(vertices[i]).operating_cost
            if c > worst:
                worst, worst_at = c, i
            if best_plan is not None and not _better(best_total, plan.investment_cost + case.sigma * worst):
                pruned = True
                break
        if pruned:
            continue
        best_plan, best_total, best_vertex = plan, plan.investment_cost + case.sigma * worst, worst_at
    if best_plan is None:
        raise RuntimeError("no plan satisfies the investment budget")
    return best_plan, best_total


def robust_cost_of(case: GridCase, plan: ExpansionPlan, budgets: Budgets, cap: int = 1_000_000,
                   tol: Tolerances | None = None) -> float:
    """Investment plus weighted exact worst-case cost of a given plan."""
    _, c = exact_worst_case(case, plan, budgets, cap, tol)
    return plan.investment_cost + case.sigma * c

