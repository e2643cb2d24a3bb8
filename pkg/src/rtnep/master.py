"""Investment master problem with one operation block per stored realization.

The flow law of a candidate line only holds when the line is built.  It is
written as a pair of big-M rows

    |p - b (theta_fr - theta_to)| <= M (1 - v),   |p| <= F v,

where ``b = base_mva / x``.  The default ``path`` policy derives each ``M`` from
the existing network so it can never cut off a feasible dispatch.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridCase
from .linsolve import (
    EQ, GE, INF, LE, LinearProgram, MipSolution, MixedIntegerProgram, Tolerances, solve_mip,
    write_mps,
)
from .recourse import DispatchModel, ExpansionPlan
from .uncertainty import Realization

log = logging.getLogger(__name__)

PATH = "path"
FIXED = "fixed"


class BigMOverflowError(ValueError):
    def __init__(self, line_id: int, value: float, cap: float):
        super().__init__(f"big-M for line {line_id} is {value:g}, above the cap {cap:g}")
        self.line_id = line_id
        self.value = value
        self.cap = cap


class BigMValidityError(RuntimeError):
    pass


@dataclass(frozen=True)
class BigMPolicy:
    """``path``: angle span from shortest existing paths; ``fixed``: a uniform angle span in radians."""

    kind: str = PATH
    theta_span: float = 2 * math.pi / 5
    cap: float = 1e9
    max_doublings: int = 3

    def __post_init__(self):
        if self.kind not in (PATH, FIXED):
            raise ValueError(f"unknown big-M policy {self.kind!r}")
        if not self.theta_span > 0 or not self.cap > 0 or self.max_doublings < 0:
            raise ValueError("big-M policy parameters must be positive")


def _angle_spans(case: GridCase) -> np.ndarray:
    """Largest possible angle difference across each candidate's endpoints, in radians.

    Each existing line caps the angle difference over it at ``F x / base``, so
    endpoints joined by existing lines are bounded by the shortest such path.
    Otherwise every in-service line still caps its own difference, and islands
    can be shifted freely, so the sum over all lines bounds any span.
    """
    base = case.base_mva
    adj: list[list[tuple[int, float]]] = [[] for _ in range(case.n_buses)]
    for k in case.existing:
        ln = case.lines[k]
        w = ln.capacity * ln.reactance / base
        adj[ln.from_bus].append((ln.to_bus, w))
        adj[ln.to_bus].append((ln.from_bus, w))
    total = sum(ln.capacity * ln.reactance / base for ln in case.lines)
    cache: dict[int, list[float]] = {}

    def dist_from(s: int) -> list[float]:
        if s not in cache:
            d = [INF] * case.n_buses
            d[s] = 0.0
            heap = [(0.0, s)]
            while heap:
                du, u = heapq.heappop(heap)
                if du > d[u]:
                    continue
                for v, w in adj[u]:
                    if du + w < d[v]:
                        d[v] = du + w
                        heapq.heappush(heap, (du + w, v))
            cache[s] = d
        return cache[s]

    spans = []
    for k in case.candidates:
        ln = case.lines[k]
        d = dist_from(ln.from_bus)[ln.to_bus]
        spans.append(d if d < INF else 2.0 * total)
    return np.array(spans, dtype=float)


def big_m_values(case: GridCase, policy: BigMPolicy = BigMPolicy(), scale: float = 1.0) -> np.ndarray:
    """Big-M per candidate line (MW), in candidate order."""
    if policy.kind == PATH:
        spans = _angle_spans(case)
    else:
        spans = np.full(len(case.candidates), policy.theta_span)
    susc = np.array([case.base_mva / case.lines[k].reactance for k in case.candidates])
    # never below the line rating, which keeps the disjunction meaningful for short paths
    m = np.maximum(scale * spans * susc, [case.lines[k].capacity for k in case.candidates])
    for k, v in zip(case.candidates, m):
        if v > policy.cap:
            raise BigMOverflowError(case.lines[k].id, float(v), policy.cap)
    return m


@dataclass
class Block:
    realization: Realization
    theta: np.ndarray
    gen: np.ndarray
    shed: np.ndarray
    flow: np.ndarray


@dataclass
class MasterProblem:
    mip: MixedIntegerProgram
    v: np.ndarray
    alpha: int
    blocks: list[Block]
    big_m: np.ndarray

    @property
    def k(self) -> int:
        return len(self.blocks) + 1


@dataclass
class MasterSolution:
    plan: ExpansionPlan
    alpha_value: float
    total_cost: float
    mip_gap: float
    best_bound: float
    nodes: int = 0
    block_costs: list[float] = field(default_factory=list)
    big_m_doublings: int = 0


def build_master(case: GridCase, realizations: list[Realization], big_m_policy: BigMPolicy = BigMPolicy(),
                 scale: float = 1.0) -> MasterProblem:
    lp = LinearProgram("master")
    base = case.base_mva
    big_m = big_m_values(case, big_m_policy, scale)
    v = np.array([lp.add_var(f"v[{case.lines[k].id}]", 0.0, 1.0, case.lines[k].build_cost)
                  for k in case.candidates], dtype=int)
    alpha = lp.add_var("alpha", 0.0, INF, case.sigma)
    if math.isfinite(case.investment_budget) and len(v):
        lp.add_row("budget", {int(j): case.lines[k].build_cost for j, k in zip(v, case.candidates)},
                   LE, case.investment_budget)
    cand_pos = {k: c for c, k in enumerate(case.candidates)}
    blocks = []
    for m, r in enumerate(realizations):
        theta = np.array([lp.add_var(f"theta[{n},{m}]", -INF, INF) for n in range(case.n_buses)], dtype=int)
        gen = np.array([lp.add_var(f"pg[{g.id},{m}]", 0.0, float(r.realized_capacity[i]))
                        for i, g in enumerate(case.generators)], dtype=int)
        shed = np.array([lp.add_var(f"pu[{d.id},{m}]", 0.0, d.shed_fraction * float(r.realized_demand[j]))
                         for j, d in enumerate(case.loads)], dtype=int)
        flow = np.array([lp.add_var(f"pl[{ln.id},{m}]", -ln.capacity, ln.capacity) for ln in case.lines], dtype=int)
        lp.add_row(f"refangle[{m}]", {int(theta[0]): 1.0}, EQ, 0.0)
        rows: list[dict[int, float]] = [dict() for _ in range(case.n_buses)]
        for i, g in enumerate(case.generators):
            rows[g.bus][gen[i]] = rows[g.bus].get(gen[i], 0.0) + 1.0
        for j, d in enumerate(case.loads):
            rows[d.bus][shed[j]] = rows[d.bus].get(shed[j], 0.0) + 1.0
        for k, ln in enumerate(case.lines):
            rows[ln.to_bus][flow[k]] = rows[ln.to_bus].get(flow[k], 0.0) + 1.0
            rows[ln.from_bus][flow[k]] = rows[ln.from_bus].get(flow[k], 0.0) - 1.0
        demand = np.zeros(case.n_buses)
        for j, d in enumerate(case.loads):
            demand[d.bus] += r.realized_demand[j]
        for n in range(case.n_buses):
            lp.add_row(f"balance[{case.buses[n].id},{m}]", rows[n], EQ, float(demand[n]))
        for k, ln in enumerate(case.lines):
            b = base / ln.reactance
            law = {int(flow[k]): 1.0, int(theta[ln.from_bus]): -b, int(theta[ln.to_bus]): b}
            if k not in cand_pos:
                lp.add_row(f"flowdef[{ln.id},{m}]", law, EQ, 0.0)
                continue
            c = cand_pos[k]
            vj, mm = int(v[c]), float(big_m[c])
            lp.add_row(f"flowdef_up[{ln.id},{m}]", {**law, vj: mm}, LE, mm)
            lp.add_row(f"flowdef_lo[{ln.id},{m}]", {**law, vj: -mm}, GE, -mm)
            lp.add_row(f"flowcap_up[{ln.id},{m}]", {int(flow[k]): 1.0, vj: -ln.capacity}, LE, 0.0)
            lp.add_row(f"flowcap_lo[{ln.id},{m}]", {int(flow[k]): 1.0, vj: ln.capacity}, GE, 0.0)
        cost = {int(alpha): 1.0}
        for i, g in enumerate(case.generators):
            cost[int(gen[i])] = -g.marginal_cost
        for j, d in enumerate(case.loads):
            cost[int(shed[j])] = -d.marginal_shed_cost
        lp.add_row(f"worstcost[{m}]", cost, GE, 0.0)
        blocks.append(Block(r, theta, gen, shed, flow))
    return MasterProblem(MixedIntegerProgram(lp, [int(j) for j in v]), v, alpha, blocks, big_m)


def _block_cost(case: GridCase, x: np.ndarray, block: Block) -> float:
    return float(case.gen_cost @ x[block.gen] + case.shed_cost @ x[block.shed])


def solve_master(case: GridCase, realizations: list[Realization], tol: Tolerances | None = None,
                 big_m_policy: BigMPolicy = BigMPolicy(), hint: ExpansionPlan | None = None,
                 node_limit: int = 200_000, time_limit: float = INF, dump_path: str | None = None,
                 check_big_m: bool = True) -> MasterSolution:
    """Solve the master MILP; verify the big-M against exact dispatch and enlarge it on failure."""
    tol = tol or Tolerances()
    scale = 1.0
    for attempt in range(big_m_policy.max_doublings + 1):
        prob = build_master(case, realizations, big_m_policy, scale)
        if dump_path:
            write_mps(prob.mip, dump_path)
        incumbent = None
        if hint is not None:
            incumbent = {int(j): b for j, b in zip(prob.v, hint.built)}
        sol = solve_mip(prob.mip, tol, incumbent_hint=incumbent, node_limit=node_limit, time_limit=time_limit)
        if not sol.optimal:
            raise RuntimeError(f"master problem ended with status {sol.status}")
        out = _solution(case, prob, sol, attempt)
        if not check_big_m or big_m_valid(case, realizations, out, tol):
            return out
        log.warning("big-M check failed; doubling (attempt %d)", attempt + 1)
        scale *= 2.0
    raise BigMValidityError(f"big-M still invalid after {big_m_policy.max_doublings} doublings")


def _solution(case: GridCase, prob: MasterProblem, sol: MipSolution, attempt: int) -> MasterSolution:
    x = sol.x
    plan = ExpansionPlan.from_vector(case, np.round(x[prob.v]) if len(prob.v) else [])
    alpha = float(x[prob.alpha])
    total = plan.investment_cost + case.sigma * alpha
    return MasterSolution(plan, alpha, total, sol.rel_gap, sol.best_bound, sol.nodes,
                          [_block_cost(case, x, b) for b in prob.blocks], attempt)


def big_m_valid(case: GridCase, realizations: list[Realization], sol: MasterSolution,
                tol: Tolerances | None = None) -> bool:
    """Exact dispatch at the master's plan must agree with the surrogate ``alpha``.

    Every stored realization must cost at most ``alpha``, and ``alpha`` may not
    exceed the costliest exact dispatch; the latter catches blocks that an
    undersized M has over-tightened.
    """
    if not realizations:
        return True
    tol = tol or Tolerances()
    model = DispatchModel(case, sol.plan, tol)
    costs = [model.solve(r).operating_cost for r in realizations]
    slack = 1e-7 * (1.0 + abs(sol.alpha_value))
    return max(costs) <= sol.alpha_value + slack and sol.alpha_value <= max(costs) + slack
