"""Cardinality-constrained uncertainty on demands and generating capacities.

A realization is a vertex of the set: load ``j`` either sits at its nominal
demand or at ``nominal + deviation``; unit ``i`` either keeps its nominal
capacity or drops to ``nominal - deviation``.  At most ``gamma_d`` loads and
``gamma_g`` units deviate at once.  Parameters with zero deviation never count
against a budget and their indicator is always 0.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .grid import GridCase

EXACT = "exact-budget"
WITHIN = "within-budget"


class BudgetError(ValueError):
    pass


class VertexCapError(ValueError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"{count} uncertainty vertices exceed the cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class Budgets:
    gamma_d: int = 0
    gamma_g: int = 0

    def __post_init__(self):
        if int(self.gamma_d) != self.gamma_d or int(self.gamma_g) != self.gamma_g:
            raise BudgetError("budgets must be integers")
        if self.gamma_d < 0 or self.gamma_g < 0:
            raise BudgetError("budgets must be nonnegative")

    def check(self, case: GridCase) -> None:
        if self.gamma_d > len(case.loads):
            raise BudgetError(f"gamma_d={self.gamma_d} exceeds the {len(case.loads)} loads")
        if self.gamma_g > len(case.generators):
            raise BudgetError(f"gamma_g={self.gamma_g} exceeds the {len(case.generators)} units")

    @classmethod
    def full(cls, case: GridCase) -> "Budgets":
        return cls(len(case.loads), len(case.generators))


@dataclass(frozen=True, eq=False)
class Realization:
    z_d: np.ndarray
    z_g: np.ndarray
    realized_demand: np.ndarray
    realized_capacity: np.ndarray

    @property
    def key(self) -> tuple[bytes, bytes]:
        return (np.asarray(self.z_d, dtype=np.uint8).tobytes(), np.asarray(self.z_g, dtype=np.uint8).tobytes())

    def __eq__(self, other) -> bool:
        return isinstance(other, Realization) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        d = "".join(str(int(v)) for v in self.z_d)
        g = "".join(str(int(v)) for v in self.z_g)
        return f"Realization(z_d={d}, z_g={g})"

    def to_dict(self) -> dict:
        return {
            "z_d": [int(v) for v in self.z_d],
            "z_g": [int(v) for v in self.z_g],
            "demand": [float(v) for v in self.realized_demand],
            "capacity": [float(v) for v in self.realized_capacity],
        }


def uncertain_loads(case: GridCase) -> np.ndarray:
    return np.flatnonzero(case.demand_deviation > 0)


def uncertain_units(case: GridCase) -> np.ndarray:
    return np.flatnonzero(case.gen_deviation > 0)


def realize(case: GridCase, z_d, z_g, budgets: Budgets | None = None) -> Realization:
    """Realization for indicator vectors ``z_d`` (loads) and ``z_g`` (units)."""
    z_d = np.asarray(z_d, dtype=np.int8).reshape(-1)
    z_g = np.asarray(z_g, dtype=np.int8).reshape(-1)
    if z_d.size != len(case.loads) or z_g.size != len(case.generators):
        raise ValueError("indicator vectors must match the number of loads and units")
    if np.any((z_d != 0) & (z_d != 1)) or np.any((z_g != 0) & (z_g != 1)):
        raise ValueError("indicators must be 0 or 1")
    if np.any(z_d[case.demand_deviation == 0]) or np.any(z_g[case.gen_deviation == 0]):
        raise ValueError("indicator set on a parameter with zero deviation")
    if budgets is not None:
        if z_d.sum() > budgets.gamma_d:
            raise BudgetError(f"demand budget violated: {int(z_d.sum())} > gamma_d={budgets.gamma_d}")
        if z_g.sum() > budgets.gamma_g:
            raise BudgetError(f"generation budget violated: {int(z_g.sum())} > gamma_g={budgets.gamma_g}")
    z_d.setflags(write=False)
    z_g.setflags(write=False)
    demand = case.demand_nominal + case.demand_deviation * z_d
    capacity = case.gen_nominal - case.gen_deviation * z_g
    demand.setflags(write=False)
    capacity.setflags(write=False)
    return Realization(z_d, z_g, demand, capacity)


def nominal(case: GridCase) -> Realization:
    return realize(case, np.zeros(len(case.loads)), np.zeros(len(case.generators)))


def realization_from_dict(case: GridCase, doc: dict) -> Realization:
    return realize(case, doc["z_d"], doc["z_g"])


def dumps_realization(r: Realization) -> str:
    return json.dumps(r.to_dict(), indent=1) + "\n"


def interval_budget_usage(case: GridCase, r: Realization) -> tuple[int, int]:
    """Ceiling-ratio budget usage of the interval form; undefined ratios count 0."""
    dd = case.demand_deviation
    gd = case.gen_deviation
    with np.errstate(divide="ignore", invalid="ignore"):
        ud = np.where(dd > 0, np.ceil(np.abs(r.realized_demand - case.demand_nominal) / np.where(dd > 0, dd, 1)), 0)
        ug = np.where(gd > 0, np.ceil(np.abs(r.realized_capacity - case.gen_nominal) / np.where(gd > 0, gd, 1)), 0)
    return int(ud.sum()), int(ug.sum())


def in_interval_set(case: GridCase, r: Realization, budgets: Budgets, tol: float = 1e-9) -> bool:
    """Membership in the interval/budget description of the set."""
    pd, pg = r.realized_demand, r.realized_capacity
    ok = np.all(np.abs(pd - case.demand_nominal) <= case.demand_deviation + tol)
    ok &= np.all(np.abs(pg - case.gen_nominal) <= case.gen_deviation + tol)
    ud, ug = interval_budget_usage(case, r)
    return bool(ok and ud <= budgets.gamma_d and ug <= budgets.gamma_g)


def _subset_count(n: int, k: int) -> int:
    return sum(math.comb(n, a) for a in range(min(n, k) + 1))


def vertex_count(case: GridCase, budgets: Budgets) -> int:
    return (_subset_count(len(uncertain_loads(case)), budgets.gamma_d)
            * _subset_count(len(uncertain_units(case)), budgets.gamma_g))


def _indicator_vectors(size: int, support: np.ndarray, k: int) -> list[tuple[int, ...]]:
    out = []
    for a in range(min(len(support), k) + 1):
        for combo in itertools.combinations(support.tolist(), a):
            v = [0] * size
            for j in combo:
                v[j] = 1
            out.append(tuple(v))
    out.sort()
    return out


def enumerate_vertices(case: GridCase, budgets: Budgets, cap: int = 1_000_000) -> Iterator[Realization]:
    """Every vertex once, in lexicographic order of ``(z_d, z_g)``."""
    count = vertex_count(case, budgets)
    if count > cap:
        raise VertexCapError(count, cap)
    dvecs = _indicator_vectors(len(case.loads), uncertain_loads(case), budgets.gamma_d)
    gvecs = _indicator_vectors(len(case.generators), uncertain_units(case), budgets.gamma_g)
    for zd in dvecs:
        for zg in gvecs:
            yield realize(case, zd, zg)


def _pick(rng: np.random.Generator, support: np.ndarray, k: int) -> np.ndarray:
    """``k`` distinct entries of ``support`` by a partial Fisher-Yates shuffle."""
    pool = support.copy()
    n = len(pool)
    for i in range(k):
        j = i + int(rng.integers(n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def _size_within(rng: np.random.Generator, n: int, k: int) -> int:
    weights = np.array([math.comb(n, a) for a in range(min(n, k) + 1)], dtype=float)
    return int(rng.choice(len(weights), p=weights / weights.sum()))


def sample_realizations(case: GridCase, budgets: Budgets, count: int, seed: int | None = 0,
                        mode: str = EXACT, rng: np.random.Generator | None = None) -> list[Realization]:
    """Uniform random vertices.

    ``exact-budget`` draws uniformly among vectors with exactly ``min(gamma,
    #uncertain)`` deviations; ``within-budget`` draws uniformly among all
    vertices with at most ``gamma`` deviations.
    """
    if mode not in (EXACT, WITHIN):
        raise ValueError(f"unknown sampling mode {mode!r}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    ul, uu = uncertain_loads(case), uncertain_units(case)
    kd, kg = min(budgets.gamma_d, len(ul)), min(budgets.gamma_g, len(uu))
    out = []
    nl, ng = len(case.loads), len(case.generators)
    for _ in range(count):
        if mode == WITHIN:
            ad, ag = _size_within(rng, len(ul), kd), _size_within(rng, len(uu), kg)
        else:
            ad, ag = kd, kg
        zd = np.zeros(nl, dtype=np.int8)
        zg = np.zeros(ng, dtype=np.int8)
        zd[_pick(rng, ul, ad)] = 1
        zg[_pick(rng, uu, ag)] = 1
        out.append(realize(case, zd, zg))
    return out
