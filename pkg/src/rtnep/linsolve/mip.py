"""Branch-and-bound over declared binary variables.

Node LPs are warm-started from the parent's optimal basis; a bound change on
a binary keeps that basis dual feasible so the dual simplex re-optimizes in a
handful of pivots.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import (
    INF, INFEASIBLE, OPTIMAL, UNBOUNDED, Basis, MipLimitError, MipSolution, MixedIntegerProgram,
    Tolerances, relative_gap,
)
from .simplex import solve_lp

log = logging.getLogger(__name__)

RESTART_EVERY = 1000


@dataclass
class _Node:
    fixed: dict[int, int]
    bound: float
    basis: Basis | None
    depth: int


def _branch_variable(x: np.ndarray, binaries: list[int], int_tol: float) -> int | None:
    """Most fractional binary, ties by lowest index; None when integral."""
    best, best_frac = None, int_tol
    for j in binaries:
        f = x[j] - math.floor(x[j])
        frac = min(f, 1.0 - f)
        if frac > best_frac:
            best, best_frac = j, frac
    return best


def solve_mip(mip: MixedIntegerProgram, tol: Tolerances | None = None, *,
              incumbent_hint: dict[int, int] | None = None, node_limit: int = 200_000,
              time_limit: float = INF) -> MipSolution:
    """Minimize a mixed-binary program to within ``tol.mip_gap_tol``.

    ``incumbent_hint`` maps binary indices to 0/1; the LP with those values fixed
    seeds the incumbent.  On node or time limit a :class:`MipLimitError` is
    raised carrying the best incumbent and bound.
    """
    tol = tol or Tolerances()
    lp = mip.lp.copy()
    binaries = sorted(mip.binaries)
    base_lb = list(lp.lb)
    base_ub = list(lp.ub)
    start = time.monotonic()
    lp_iters = 0

    def node_lp(fixed: dict[int, int], basis: Basis | None):
        nonlocal lp_iters
        for j in binaries:
            lp.lb[j], lp.ub[j] = base_lb[j], base_ub[j]
        for j, v in fixed.items():
            lp.lb[j] = lp.ub[j] = float(v)
        sol = solve_lp(lp, tol, basis)
        lp_iters += sol.iterations
        return sol

    incumbent_x = None
    incumbent = INF

    def accept(sol) -> None:
        nonlocal incumbent_x, incumbent
        if sol.objective < incumbent:
            incumbent, incumbent_x = sol.objective, sol.x.copy()

    if not binaries:
        sol = node_lp({}, None)
        if sol.status != OPTIMAL:
            return MipSolution(sol.status, None, INF if sol.status == INFEASIBLE else -INF,
                               INF if sol.status == INFEASIBLE else -INF, 1, lp_iters)
        return MipSolution(OPTIMAL, sol.x, sol.objective, sol.objective, 1, lp_iters)

    if incumbent_hint:
        fixed = {j: int(round(v)) for j, v in incumbent_hint.items() if j in set(binaries)}
        if len(fixed) == len(binaries):
            sol = node_lp(fixed, None)
            if sol.status == OPTIMAL:
                accept(sol)

    root = node_lp({}, None)
    if root.status == UNBOUNDED:
        return MipSolution(UNBOUNDED, None, -INF, -INF, 1, lp_iters)
    if root.status != OPTIMAL:
        return MipSolution(INFEASIBLE, None, INF, INF, 1, lp_iters)

    pruned_bound = INF

    def prunable(bound: float) -> bool:
        nonlocal pruned_bound
        if incumbent < INF and bound >= incumbent - tol.mip_gap_tol * max(abs(incumbent), 1.0):
            pruned_bound = min(pruned_bound, bound)
            return True
        return False

    stack: list[tuple[_Node, object]] = [(_Node({}, root.objective, None, 0), root)]
    nodes = 0
    while stack:
        if nodes and nodes % RESTART_EVERY == 0 and len(stack) > 1:
            # best-bound restart: continue the dive from the most promising open node
            k = min(range(len(stack)), key=lambda i: (stack[i][0].bound, i))
            stack.append(stack.pop(k))
        node, sol = stack.pop()
        if sol is None:
            if prunable(node.bound):
                continue
            sol = node_lp(node.fixed, node.basis)
        nodes += 1
        if nodes > node_limit or time.monotonic() - start > time_limit:
            bound = min([n.bound for n, _ in stack] + [node.bound])
            raise MipLimitError(
                f"branch-and-bound limit reached after {nodes} nodes",
                MipSolution("limit", incumbent_x, incumbent, bound, nodes, lp_iters))
        if sol.status != OPTIMAL or prunable(sol.objective):
            continue
        j = _branch_variable(sol.x, binaries, tol.int_tol)
        if j is None:
            fixed = {b: int(round(sol.x[b])) for b in binaries}
            polished = node_lp(fixed, sol.basis)
            accept(polished if polished.status == OPTIMAL else sol)
            continue
        first = 1 if sol.x[j] - math.floor(sol.x[j]) >= 0.5 else 0
        for v in (1 - first, first):  # pushed last is explored first
            child = dict(node.fixed)
            child[j] = v
            stack.append((_Node(child, sol.objective, sol.basis, node.depth + 1), None))

    if incumbent_x is None:
        return MipSolution(INFEASIBLE, None, INF, INF, nodes, lp_iters)
    return MipSolution(OPTIMAL, incumbent_x, incumbent, min(incumbent, pruned_bound), nodes, lp_iters)
