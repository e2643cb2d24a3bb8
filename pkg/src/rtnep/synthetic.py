"""Seeded instance generators: perturbed desk cases and a large meshed grid."""

from __future__ import annotations

import numpy as np

from .grid import Bus, Generator, GridCase, Line, Load, garver6
from .linsolve import Tolerances


def perturbed_garver(seed: int, n_candidates: int | None = None) -> GridCase:
    """Garver network with randomized demands, capacities, costs and deviations.

    ``n_candidates`` keeps only that many candidate corridors (chosen at random)
    so that plan enumeration stays cheap.
    """
    rng = np.random.default_rng(seed)
    base = garver6()
    lines = list(base.lines)
    cands = [k for k in range(len(lines)) if lines[k].is_candidate]
    if n_candidates is not None and n_candidates < len(cands):
        keep = set(sorted(rng.choice(cands, n_candidates, replace=False).tolist()))
        lines = [ln for k, ln in enumerate(lines) if not ln.is_candidate or k in keep]
    gens = []
    for g in base.generators:
        cap = float(np.round(g.nominal_capacity * rng.uniform(0.6, 1.4)))
        gens.append(Generator(g.id, g.bus, float(rng.integers(5, 40)), cap, float(np.round(cap * rng.uniform(0.1, 0.6)))))
    loads = []
    for d in base.loads:
        dem = float(np.round(d.nominal_demand * rng.uniform(0.6, 1.4)))
        loads.append(Load(d.id, d.bus, float(rng.integers(200, 2000)), dem,
                          float(np.round(dem * rng.uniform(0.1, 0.5))), 1.0))
    lines = [Line(ln.id, ln.from_bus, ln.to_bus, ln.reactance, float(np.round(ln.capacity * rng.uniform(0.6, 1.4))),
                  ln.status, ln.build_cost) for ln in lines]
    return GridCase(base.buses, tuple(lines), tuple(gens), tuple(loads),
                    investment_budget=float(rng.integers(60, 200)), sigma=float(rng.choice([0.005, 0.01, 0.02])),
                    base_mva=base.base_mva, name=f"garver-{seed}")


def random_plan(case: GridCase, rng: np.random.Generator, p: float = 0.3):
    from .recourse import ExpansionPlan

    return ExpansionPlan.from_vector(case, (rng.random(len(case.candidates)) < p).astype(int))


def large_grid(n_buses: int = 2000, n_lines: int = 2500, n_candidates: int = 100, seed: int = 0,
               congested: int = 15) -> GridCase:
    """Meshed grid with local generation, a few congested corridors and candidate lines.

    ``n_lines`` counts existing and candidate lines together.  Buses are laid
    out along a ring of clusters; each line joins buses a short index distance
    apart so angles stay moderate.  After a nominal dispatch the ``congested``
    most loaded corridors are derated below their flow, and candidates are
    placed in parallel to them first, then at random short distances.
    """
    from .recourse import ExpansionPlan, solve_dispatch
    from .uncertainty import nominal

    rng = np.random.default_rng(seed)
    n_exist = n_lines - n_candidates
    if n_exist < n_buses - 1:
        raise ValueError("not enough lines to connect the buses")
    buses = tuple(Bus(i) for i in range(n_buses))
    pairs = set()
    edges = []
    for i in range(1, n_buses):
        j = int(i - 1 - rng.integers(0, min(i, 4)))
        edges.append((j, i))
        pairs.add((j, i))
    while len(edges) < n_exist:
        i = int(rng.integers(0, n_buses))
        j = int((i + rng.integers(2, 12)) % n_buses)
        a, b = min(i, j), max(i, j)
        if a != b and (a, b) not in pairs:
            pairs.add((a, b))
            edges.append((a, b))
    lines = [Line(k + 1, a, b, float(np.round(rng.uniform(0.05, 0.2), 3)), 400.0, "existing", None)
             for k, (a, b) in enumerate(edges)]
    gen_buses = list(range(5, n_buses, 10))
    gens = []
    for i, b in enumerate(gen_buses):
        cap = float(np.round(rng.uniform(150, 300)))
        gens.append(Generator(i + 1, b, float(np.round(rng.uniform(10, 40), 1)), cap, float(np.round(0.2 * cap))))
    load_buses = sorted(rng.choice(n_buses, n_buses // 2, replace=False).tolist())
    loads = []
    for j, b in enumerate(load_buses):
        dem = float(np.round(rng.uniform(10, 25), 1))
        loads.append(Load(j + 1, b, 1000.0, dem, float(np.round(0.2 * dem, 2)), 1.0))
    case = GridCase(buses, tuple(lines), tuple(gens), tuple(loads), investment_budget=float("inf"), sigma=0.01,
                    base_mva=100.0, name=f"synthetic-{n_buses}")
    d = solve_dispatch(case, ExpansionPlan.empty(case), nominal(case), Tolerances())
    flow = np.abs(d.flows)
    hot = [int(k) for k in np.argsort(-flow, kind="stable")[:congested]]
    for k in hot:
        ln = lines[k]
        lines[k] = Line(ln.id, ln.from_bus, ln.to_bus, ln.reactance, float(np.round(0.7 * flow[k])), "existing", None)
    cand = []
    nid = len(lines) + 1
    for k in hot[:n_candidates]:
        ln = lines[k]
        cand.append(Line(nid, ln.from_bus, ln.to_bus, ln.reactance, 200.0, "candidate",
                         float(np.round(rng.uniform(20, 60)))))
        nid += 1
    while len(cand) < n_candidates:
        i = int(rng.integers(0, n_buses))
        j = int((i + rng.integers(1, 8)) % n_buses)
        if i == j:
            continue
        cand.append(Line(nid, min(i, j), max(i, j), float(np.round(rng.uniform(0.05, 0.2), 3)), 200.0,
                         "candidate", float(np.round(rng.uniform(20, 60)))))
        nid += 1
    return case.with_changes(lines=tuple(lines) + tuple(cand))
