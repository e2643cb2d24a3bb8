"""Worst-case search for a fixed plan by block coordinate descent.

Each pass solves the dispatch LP at the current realization and then moves to
the vertex maximizing the first-order model of the operating cost built from
the LP's demand and capacity duals.  Convexity of the LP value function makes
the sequence of dispatch costs nondecreasing.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import GridCase
from .linsolve import Tolerances
from .recourse import DispatchModel, DispatchResult, ExpansionPlan
from .uncertainty import Budgets, Realization, nominal, realize, sample_realizations, uncertain_loads, uncertain_units

EPS_IL = 1e-12
MAX_ITER = 200
GAIN_TOL = 1e-9


@dataclass
class InnerState:
    nu: int
    realization: Realization
    dispatch: DispatchResult | None
    c_il: float
    trace: list[float] = field(default_factory=list)
    path: list[Realization] = field(default_factory=list)
    converged: bool = False
    max_iter_hit: bool = False
    start_index: int = 0

    @property
    def cost(self) -> float:
        return self.dispatch.operating_cost


def _top(gains: np.ndarray, k: int, tol: float) -> np.ndarray:
    """Indices of the ``k`` largest gains above ``tol``; ties by lowest index."""
    pos = np.flatnonzero(gains > tol)
    if k <= 0 or pos.size == 0:
        return pos[:0]
    order = sorted(pos.tolist(), key=lambda j: (-gains[j], j))
    return np.array(order[:k], dtype=int)


def taylor_gains(case: GridCase, dispatch: DispatchResult) -> tuple[np.ndarray, np.ndarray]:
    return dispatch.mu_d * case.demand_deviation, -dispatch.mu_g * case.gen_deviation


def taylor_argmax(case: GridCase, budgets: Budgets, dispatch: DispatchResult, prev: Realization | None = None,
                  gain_tol: float = GAIN_TOL) -> Realization:
    """Vertex maximizing the linearized operating cost around the dispatch point.

    The model is separable, so each budget is filled greedily with the largest
    strictly positive gains.  ``prev`` only shifts the model by a constant.
    """
    gd, gg = taylor_gains(case, dispatch)
    zd = np.zeros(len(case.loads), dtype=np.int8)
    zg = np.zeros(len(case.generators), dtype=np.int8)
    zd[_top(gd, budgets.gamma_d, gain_tol)] = 1
    zg[_top(gg, budgets.gamma_g, gain_tol)] = 1
    return realize(case, zd, zg)


def taylor_value(case: GridCase, dispatch: DispatchResult, at: Realization, r: Realization) -> float:
    """First-order model of the operating cost around ``at`` evaluated at ``r``."""
    return float(dispatch.operating_cost
                 + dispatch.mu_d @ (r.realized_demand - at.realized_demand)
                 + dispatch.mu_g @ (r.realized_capacity - at.realized_capacity))


def relative_change(c_il: float, c: float) -> float:
    if math.isinf(c_il):
        return math.inf
    return abs(c_il - c) / max(abs(c_il), 1.0)


def coordinate_descent(case: GridCase, plan: ExpansionPlan, budgets: Budgets, init: Realization | None = None,
                       eps_il: float = EPS_IL, max_iter: int = MAX_ITER, tol: Tolerances | None = None,
                       model: DispatchModel | None = None) -> tuple[Realization, DispatchResult, InnerState]:
    """Alternate dispatch and Taylor maximization until the cost settles.

    Stops when ``|c_il - c| / max(|c_il|, 1) <= eps_il``.  If ``max_iter``
    passes are used up the best iterate is returned and ``max_iter_hit`` set.
    """
    if eps_il <= 0:
        raise ValueError("eps_il must be positive")
    budgets.check(case)
    model = model or DispatchModel(case, plan, tol)
    r = init if init is not None else nominal(case)
    if r.z_d.sum() > budgets.gamma_d or r.z_g.sum() > budgets.gamma_g:
        raise ValueError("initial realization violates the budgets")
    state = InnerState(0, r, None, math.inf)
    best: tuple[Realization, DispatchResult] | None = None
    while True:
        state.nu += 1
        d = model.solve(r)
        state.trace.append(d.operating_cost)
        state.path.append(r)
        if best is None or d.operating_cost > best[1].operating_cost:
            best = (r, d)
        if relative_change(state.c_il, d.operating_cost) <= eps_il:
            state.converged = True
            break
        state.c_il = d.operating_cost
        if state.nu >= max_iter:
            state.max_iter_hit = True
            break
        r = taylor_argmax(case, budgets, d, r)
    state.realization, state.dispatch = best
    state.c_il = max(state.c_il, best[1].operating_cost)
    return best[0], best[1], state


def heuristic_start(case: GridCase, budgets: Budgets) -> Realization:
    """Deviate the loads with the largest shed exposure and the units losing the most MW."""
    wd = case.demand_deviation * case.shed_cost
    wg = case.gen_deviation.astype(float)
    zd = np.zeros(len(case.loads), dtype=np.int8)
    zg = np.zeros(len(case.generators), dtype=np.int8)
    zd[_top(wd, budgets.gamma_d, 0.0)] = 1
    zg[_top(wg, budgets.gamma_g, 0.0)] = 1
    return realize(case, zd, zg)


def default_starts(case: GridCase, budgets: Budgets, k: int = 10, seed: int | None = 0) -> list[Realization]:
    """Nominal, the heuristic vertex, then ``k`` random exact-budget vertices; duplicates dropped."""
    starts = [nominal(case), heuristic_start(case, budgets)]
    if k > 0 and (len(uncertain_loads(case)) or len(uncertain_units(case))):
        starts += sample_realizations(case, budgets, k, seed=seed)
    out, seen = [], set()
    for s in starts:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def _run_start(args):
    case, plan, budgets, start, eps_il, max_iter, tol, basis = args
    model = DispatchModel(case, plan, tol)
    model.basis = basis
    return coordinate_descent(case, plan, budgets, start, eps_il, max_iter, tol, model)


def multistart_worst_case(case: GridCase, plan: ExpansionPlan, budgets: Budgets, starts: list[Realization],
                          eps_il: float = EPS_IL, max_iter: int = MAX_ITER, tol: Tolerances | None = None,
                          jobs: int = 1) -> tuple[Realization, DispatchResult, InnerState]:
    """Coordinate descent from every start; keep the costliest result (ties by start order).

    Every start uses its own dispatch model warm-started from one shared basis
    (optimal at the first start), so the outcome does not depend on ``jobs``.
    """
    if not starts:
        raise ValueError("at least one start is required")
    basis = DispatchModel(case, plan, tol).solve(starts[0]).basis
    tasks = [(case, plan, budgets, s, eps_il, max_iter, tol, basis) for s in starts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_start, tasks))
    else:
        results = [_run_start(t) for t in tasks]
    best = 0
    for i, res in enumerate(results):
        res[2].start_index = i
        if res[1].operating_cost > results[best][1].operating_cost:
            best = i
    return results[best]
