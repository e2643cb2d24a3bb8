"""DC dispatch with load shedding for a fixed plan and realization.

Demands and capacities enter the LP as variables pinned by equality rows, so
the duals of those rows are the cost sensitivities the worst-case search needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridCase
from .linsolve import EQ, INF, INFEASIBLE, LE, OPTIMAL, Basis, LinearProgram, Tolerances, solve_lp
from .uncertainty import Realization


class InfeasibleDispatchError(RuntimeError):
    def __init__(self, buses: tuple[int, ...]):
        super().__init__(f"dispatch infeasible; buses involved: {list(buses)}")
        self.buses = buses


@dataclass(frozen=True, eq=False)
class ExpansionPlan:
    built: tuple[int, ...]
    investment_cost: float

    @classmethod
    def from_vector(cls, case: GridCase, built) -> "ExpansionPlan":
        v = tuple(int(round(b)) for b in built)
        if len(v) != len(case.candidates):
            raise ValueError(f"plan has {len(v)} entries but the case has {len(case.candidates)} candidates")
        if any(b not in (0, 1) for b in v):
            raise ValueError("plan entries must be 0 or 1")
        return cls(v, float(case.candidate_costs @ np.asarray(v, dtype=float)) if v else 0.0)

    @classmethod
    def empty(cls, case: GridCase) -> "ExpansionPlan":
        return cls.from_vector(case, [0] * len(case.candidates))

    def __eq__(self, other) -> bool:
        return isinstance(other, ExpansionPlan) and self.built == other.built

    def __hash__(self) -> int:
        return hash(self.built)

    def __repr__(self) -> str:
        return f"ExpansionPlan({''.join(map(str, self.built))}, cost={self.investment_cost:g})"

    def to_dict(self, case: GridCase | None = None) -> dict:
        d = {"built": list(self.built), "investment_cost": self.investment_cost}
        if case is not None:
            d["built_line_ids"] = [case.lines[k].id for k, b in zip(case.candidates, self.built) if b]
        return d


@dataclass
class DispatchResult:
    operating_cost: float
    generation: np.ndarray
    shedding: np.ndarray
    flows: np.ndarray
    angles: np.ndarray
    mu_d: np.ndarray
    mu_g: np.ndarray
    basis: Basis | None = field(default=None, repr=False)
    iterations: int = 0


@dataclass(frozen=True)
class DispatchLayout:
    theta: np.ndarray
    gen: np.ndarray
    shed: np.ndarray
    flow: np.ndarray
    demand: np.ndarray
    capacity: np.ndarray
    demand_rows: np.ndarray
    capacity_rows: np.ndarray
    balance_rows: np.ndarray


def built_lines(case: GridCase, plan: ExpansionPlan) -> list[int]:
    """Positions of lines in service under ``plan``."""
    on = set(case.existing)
    on.update(k for k, b in zip(case.candidates, plan.built) if b)
    return sorted(on)


def components(n: int, edges) -> np.ndarray:
    """Connected-component label per bus; labels are the lowest bus index of each component."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(a) for a in range(n)])


def build_dispatch_lp(case: GridCase, plan: ExpansionPlan, realization: Realization) -> LinearProgram:
    """Dispatch LP; ``lp.layout`` records where each quantity lives."""
    if len(plan.built) != len(case.candidates):
        raise ValueError("plan does not match the case candidates")
    if len(realization.realized_demand) != len(case.loads) or len(realization.realized_capacity) != len(case.generators):
        raise ValueError("realization does not match the case")
    lp = LinearProgram("dispatch")
    nb = case.n_buses
    base = case.base_mva
    theta = np.array([lp.add_var(f"theta[{i}]", -INF, INF) for i in range(nb)])
    gen = np.array([lp.add_var(f"pg[{g.id}]", 0.0, INF, g.marginal_cost) for g in case.generators], dtype=int)
    shed = np.array([lp.add_var(f"pu[{d.id}]", 0.0, INF, d.marginal_shed_cost) for d in case.loads], dtype=int)
    on = set(built_lines(case, plan))
    flow = np.array([lp.add_var(f"pl[{ln.id}]", -ln.capacity if k in on else 0.0, ln.capacity if k in on else 0.0)
                     for k, ln in enumerate(case.lines)], dtype=int)
    demand = np.array([lp.add_var(f"pd[{d.id}]", -INF, INF) for d in case.loads], dtype=int)
    capacity = np.array([lp.add_var(f"pgmax[{g.id}]", -INF, INF) for g in case.generators], dtype=int)

    rows: list[dict[int, float]] = [dict() for _ in range(nb)]
    for i, g in enumerate(case.generators):
        rows[g.bus][gen[i]] = rows[g.bus].get(gen[i], 0.0) + 1.0
    for j, d in enumerate(case.loads):
        rows[d.bus][shed[j]] = rows[d.bus].get(shed[j], 0.0) + 1.0
        rows[d.bus][demand[j]] = rows[d.bus].get(demand[j], 0.0) - 1.0
    for k in on:
        ln = case.lines[k]
        rows[ln.to_bus][flow[k]] = rows[ln.to_bus].get(flow[k], 0.0) + 1.0
        rows[ln.from_bus][flow[k]] = rows[ln.from_bus].get(flow[k], 0.0) - 1.0
    balance = np.array([lp.add_row(f"balance[{case.buses[n].id}]", rows[n], EQ, 0.0) for n in range(nb)])
    for k in sorted(on):
        ln = case.lines[k]
        b = base / ln.reactance
        lp.add_row(f"flowdef[{ln.id}]", {flow[k]: 1.0, theta[ln.from_bus]: -b, theta[ln.to_bus]: b}, EQ, 0.0)
    for i, g in enumerate(case.generators):
        lp.add_row(f"genmax[{g.id}]", {gen[i]: 1.0, capacity[i]: -1.0}, LE, 0.0)
    for j, d in enumerate(case.loads):
        lp.add_row(f"shedmax[{d.id}]", {shed[j]: 1.0, demand[j]: -d.shed_fraction}, LE, 0.0)
    demand_rows = np.array([lp.add_row(f"fixdemand[{d.id}]", {demand[j]: 1.0}, EQ, realization.realized_demand[j])
                            for j, d in enumerate(case.loads)], dtype=int)
    capacity_rows = np.array([lp.add_row(f"fixcapacity[{g.id}]", {capacity[i]: 1.0}, EQ, realization.realized_capacity[i])
                              for i, g in enumerate(case.generators)], dtype=int)
    comp = components(nb, [(case.lines[k].from_bus, case.lines[k].to_bus) for k in on])
    for ref in sorted(set(comp.tolist())):
        lp.add_row(f"refangle[{case.buses[ref].id}]", {theta[ref]: 1.0}, EQ, 0.0)
    lp.layout = DispatchLayout(theta, gen, shed, flow, demand, capacity, demand_rows, capacity_rows, balance)
    return lp


class DispatchModel:
    """Dispatch LP for one plan, re-solved across realizations with warm starts."""

    def __init__(self, case: GridCase, plan: ExpansionPlan, tol: Tolerances | None = None):
        from .uncertainty import nominal

        self.case = case
        self.plan = plan
        self.tol = tol or Tolerances()
        self.lp = build_dispatch_lp(case, plan, nominal(case))
        self.layout: DispatchLayout = self.lp.layout
        self.basis: Basis | None = None

    def solve(self, realization: Realization, basis: Basis | None = None, warm: bool = True) -> DispatchResult:
        lay = self.layout
        for j, r in enumerate(lay.demand_rows):
            self.lp.rhs[r] = float(realization.realized_demand[j])
        for i, r in enumerate(lay.capacity_rows):
            self.lp.rhs[r] = float(realization.realized_capacity[i])
        start = basis if basis is not None else (self.basis if warm else None)
        sol = solve_lp(self.lp, self.tol, start)
        if sol.status != OPTIMAL:
            if sol.status == INFEASIBLE:
                if np.all(self.case.shed_fraction >= 1.0):
                    raise AssertionError("dispatch reported infeasible although all demand is sheddable")
                raise InfeasibleDispatchError(self._infeasible_buses(realization, sol.infeasible_rows))
            raise RuntimeError(f"dispatch LP ended with status {sol.status}")
        self.basis = sol.basis
        x = sol.x
        return DispatchResult(
            operating_cost=sol.objective,
            generation=x[lay.gen], shedding=x[lay.shed], flows=x[lay.flow], angles=x[lay.theta],
            mu_d=sol.duals[lay.demand_rows], mu_g=sol.duals[lay.capacity_rows],
            basis=sol.basis, iterations=sol.iterations)

    def _infeasible_buses(self, realization: Realization, rows) -> tuple[int, ...]:
        case = self.case
        lay = self.layout
        bal = {int(r): n for n, r in enumerate(lay.balance_rows)}
        buses = {case.buses[bal[r]].id for r in rows if r in bal}
        if buses:
            return tuple(sorted(buses))
        # fall back to islands whose supply cannot reach the unsheddable demand
        on = built_lines(case, self.plan)
        comp = components(case.n_buses, [(case.lines[k].from_bus, case.lines[k].to_bus) for k in on])
        supply = np.zeros(case.n_buses)
        need = np.zeros(case.n_buses)
        for i, g in enumerate(case.generators):
            supply[comp[g.bus]] += realization.realized_capacity[i]
        for j, d in enumerate(case.loads):
            need[comp[d.bus]] += (1.0 - d.shed_fraction) * realization.realized_demand[j]
        short = {c for c in set(comp.tolist()) if need[c] > supply[c] + 1e-9}
        picked = [case.buses[n].id for n in range(case.n_buses) if comp[n] in short]
        return tuple(sorted(picked or case.bus_ids))


def solve_dispatch(case: GridCase, plan: ExpansionPlan, realization: Realization,
                   tol: Tolerances | None = None, basis: Basis | None = None) -> DispatchResult:
    """Minimum operating cost for ``plan`` under ``realization``.

    Raises :class:`InfeasibleDispatchError` when the unsheddable part of demand
    cannot be served (possible only with shed fractions below one).
    """
    return DispatchModel(case, plan, tol).solve(realization, basis)
