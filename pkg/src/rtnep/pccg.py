"""Outer loop: alternate the investment master and the worst-case search.

The master's optimum is a lower bound on the robust cost; investment plus the
weighted worst operating cost found for the master's plan is an upper bound.
Each worst case found is added to the master as a new operation block.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace

from .grid import GridCase
from .linsolve import INF, MipLimitError, Tolerances
from .master import BigMPolicy, solve_master
from .recourse import DispatchModel, ExpansionPlan
from .uncertainty import Budgets, Realization, nominal
from .worstcase import EPS_IL, MAX_ITER, default_starts, multistart_worst_case

EPS_OL = 1e-6

CONVERGED = "converged"
STALLED = "stalled"
LIMIT = "limit"


@dataclass(frozen=True)
class SolveConfig:
    budgets: Budgets = Budgets()
    eps_ol: float = EPS_OL
    eps_il: float = EPS_IL
    multistart: int = 10
    seed: int = 0
    max_outer: int = 50
    max_inner: int = MAX_ITER
    time_limit: float = INF
    node_limit: int = 200_000
    big_m_policy: BigMPolicy = BigMPolicy()
    tol: Tolerances = Tolerances()
    reuse_worst: bool = True
    jobs: int = 1

    def __post_init__(self):
        if not (self.eps_ol > 0 and self.eps_il > 0 and self.time_limit > 0):
            raise ValueError("tolerances and limits must be positive")
        if self.multistart < 0 or self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration counts out of range")

    def with_changes(self, **kwargs) -> "SolveConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {
            "gamma_d": self.budgets.gamma_d, "gamma_g": self.budgets.gamma_g,
            "eps_ol": self.eps_ol, "eps_il": self.eps_il, "multistart": self.multistart, "seed": self.seed,
            "max_outer": self.max_outer, "max_inner": self.max_inner,
            "time_limit": None if math.isinf(self.time_limit) else self.time_limit,
            "node_limit": self.node_limit,
            "big_m_policy": {"kind": self.big_m_policy.kind, "theta_span": self.big_m_policy.theta_span,
                             "cap": self.big_m_policy.cap, "max_doublings": self.big_m_policy.max_doublings},
            "feas_tol": self.tol.feas_tol, "mip_gap": self.tol.mip_gap_tol, "reuse_worst": self.reuse_worst,
        }


@dataclass
class OuterRecord:
    k: int
    plan: ExpansionPlan
    lower_bound: float
    worst_cost: float
    upper_bound: float
    gap: float
    realization: Realization
    inner_iters: int
    inner_trace: list[float]
    inner_flagged: bool
    master_nodes: int = 0
    big_m_doublings: int = 0
    master_ms: float = 0.0
    inner_ms: float = 0.0

    @property
    def wall_ms(self) -> float:
        return self.master_ms + self.inner_ms


@dataclass
class SolveLog:
    records: list[OuterRecord] = field(default_factory=list)
    status: str = ""
    message: str = ""
    total_cost: float = math.nan

    @property
    def lower_bounds(self) -> list[float]:
        return [r.lower_bound for r in self.records]

    @property
    def upper_bounds(self) -> list[float]:
        return [r.upper_bound for r in self.records]

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self, timing: bool = False) -> dict:
        recs = []
        for r in self.records:
            d = {
                "k": r.k, "plan": list(r.plan.built), "investment_cost": r.plan.investment_cost,
                "lower_bound": r.lower_bound, "worst_cost": r.worst_cost, "upper_bound": r.upper_bound,
                "gap": r.gap, "z_d": [int(v) for v in r.realization.z_d], "z_g": [int(v) for v in r.realization.z_g],
                "inner_iters": r.inner_iters, "inner_trace": r.inner_trace, "inner_max_iter_hit": r.inner_flagged,
                "master_nodes": r.master_nodes, "big_m_doublings": r.big_m_doublings,
            }
            if timing:
                d.update(master_ms=r.master_ms, inner_ms=r.inner_ms)
            recs.append(d)
        return {"status": self.status, "message": self.message, "total_cost": self.total_cost, "iterations": recs}

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=1) + "\n"

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "lower_bound", "upper_bound", "gap", "inner_iters", "wall_ms"])
        for r in self.records:
            w.writerow([r.k, repr(r.lower_bound), repr(r.upper_bound), repr(r.gap), r.inner_iters,
                        f"{r.wall_ms:.3f}" if timing else ""])
        return buf.getvalue()


def outer_gap(upper: float, lower: float) -> float:
    return abs(upper - lower) / max(abs(lower), 1.0)


def _worst_case(case, plan, config, stored):
    b = config.budgets
    starts = default_starts(case, b, config.multistart, config.seed)
    if config.reuse_worst:
        seen = set(starts)
        starts += [r for r in stored if r not in seen]
    return multistart_worst_case(case, plan, b, starts, config.eps_il, config.max_inner, config.tol, config.jobs)


def solve_robust_tnep(case: GridCase, config: SolveConfig = SolveConfig()
                      ) -> tuple[ExpansionPlan, Realization, SolveLog]:
    """Robust plan by primal column-and-constraint generation.

    Terminates when ``|upper - lower| / max(|lower|, 1) <= eps_ol``, when the
    worst case repeats a stored one (``stalled``) or on a limit (``limit``; the
    plan with the best upper bound is returned).
    """
    config.budgets.check(case)
    start = time.monotonic()
    deadline = start + config.time_limit
    log = SolveLog()
    stored: list[Realization] = []
    plan = ExpansionPlan.empty(case)
    lower = 0.0
    nodes = doublings = 0
    master_ms = 0.0
    best: tuple[float, ExpansionPlan, Realization] | None = None
    k = 1
    while True:
        t0 = time.monotonic()
        worst, dispatch, state = _worst_case(case, plan, config, stored)
        inner_ms = 1e3 * (time.monotonic() - t0)
        upper = plan.investment_cost + case.sigma * dispatch.operating_cost
        gap = outer_gap(upper, lower)
        log.records.append(OuterRecord(k, plan, lower, dispatch.operating_cost, upper, gap, worst, state.nu,
                                       list(state.trace), state.max_iter_hit, nodes, doublings, master_ms, inner_ms))
        if best is None or upper < best[0]:
            best = (upper, plan, worst)
        if gap <= config.eps_ol:
            log.status, log.message = CONVERGED, f"gap {gap:.3g} after {k} iterations"
            break
        if worst in stored:
            log.status, log.message = STALLED, f"worst case repeated at iteration {k}; gap {gap:.3g}"
            break
        if k >= config.max_outer:
            log.status, log.message = LIMIT, f"outer iteration limit {config.max_outer} reached; gap {gap:.3g}"
            break
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            log.status, log.message = LIMIT, f"time limit reached after {k} iterations; gap {gap:.3g}"
            break
        stored.append(worst)
        t0 = time.monotonic()
        try:
            ms = solve_master(case, stored, config.tol, config.big_m_policy, hint=plan,
                              node_limit=config.node_limit, time_limit=remaining)
        except MipLimitError as exc:
            log.status, log.message = LIMIT, f"master limit at iteration {k + 1}: {exc}"
            break
        master_ms = 1e3 * (time.monotonic() - t0)
        plan, lower, nodes, doublings = ms.plan, ms.total_cost, ms.nodes, ms.big_m_doublings
        k += 1
    if log.status == CONVERGED or log.status == STALLED:
        last = log.records[-1]
        log.total_cost = last.upper_bound
        return last.plan, last.realization, log
    log.total_cost = best[0]
    return best[1], best[2], log


def deterministic_plan(case: GridCase, tol: Tolerances = Tolerances(),
                       big_m_policy: BigMPolicy = BigMPolicy()) -> tuple[ExpansionPlan, float]:
    """Expansion plan for nominal conditions only, with its total cost."""
    r = nominal(case)
    ms = solve_master(case, [r], tol, big_m_policy, hint=ExpansionPlan.empty(case))
    cost = DispatchModel(case, ms.plan, tol).solve(r).operating_cost
    return ms.plan, ms.plan.investment_cost + case.sigma * cost

