"""Acceptance criteria, one test per criterion.

Each test records a pass/fail line in ``conftest.ACCEPTANCE``; the lines are
printed in the terminal summary.  Tolerances are the stated ones.
"""

import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from oracles import exhaustive_taylor
from rtnep.cli import main
from rtnep.grid import builtin_case_path
from rtnep.linsolve import OPTIMAL, solve_lp
from rtnep.master import big_m_valid, solve_master
from rtnep.oracle import exact_robust_plan, exact_worst_case
from rtnep.pccg import CONVERGED, STALLED, SolveConfig, deterministic_plan, solve_robust_tnep
from rtnep.assess import assess_plan
from rtnep.recourse import DispatchModel, ExpansionPlan, build_dispatch_lp
from rtnep.synthetic import large_grid, perturbed_garver, random_plan
from rtnep.uncertainty import WITHIN, Budgets, sample_realizations
from rtnep.worstcase import coordinate_descent, default_starts, multistart_worst_case, taylor_argmax, taylor_gains

from test_worstcase import fake_dispatch, flat_case

GARVER_BUDGETS = [(0, 0), (1, 1), (2, 1), (5, 3)]
SOLVES: dict = {}


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    assert ok, f"criterion {key}: {detail}"


def rel(a, b):
    return abs(a - b) / max(abs(b), 1.0)


@pytest.fixture(scope="module")
def garver_runs(garver):
    """Solver and oracle results for the four garver budgets, with timings."""
    if not SOLVES:
        for bd in GARVER_BUDGETS:
            b = Budgets(*bd)
            t = time.monotonic()
            plan, worst, log = solve_robust_tnep(garver, SolveConfig(budgets=b, multistart=10))
            t_solve = time.monotonic() - t
            oplan, ocost = exact_robust_plan(garver, b)
            SOLVES[bd] = dict(plan=plan, log=log, oplan=oplan, ocost=ocost, t_solve=t_solve)
    return SOLVES


def test_criterion_1_oracle_equivalence(garver, garver_runs):
    lines, ok = [], True
    t_total = sum(r["t_solve"] for r in garver_runs.values())
    for bd, r in garver_runs.items():
        d = rel(r["log"].total_cost, r["ocost"])
        same = r["plan"] == r["oplan"]
        ok &= same and d <= 1e-6
        lines.append(f"{bd}: same plan {same}, rel diff {d:.1e}")
    ok &= t_total < 300

    # local worst cases on a randomized garver-scale suite
    n, flagged, flagged_single, worst_gap = 200, 0, 0, 0.0
    for i in range(n):
        rng = np.random.default_rng(1000 + i)
        case = perturbed_garver(i)
        plan = random_plan(case, rng)
        b = Budgets(int(rng.integers(1, 6)), int(rng.integers(1, 4)))
        exact = exact_worst_case(case, plan, b)[1]
        multi = multistart_worst_case(case, plan, b, default_starts(case, b, 10, i))[1].operating_cost
        single = coordinate_descent(case, plan, b)[1].operating_cost
        tol = 1e-9 * (1 + abs(exact))
        flagged += multi < exact - tol
        flagged_single += single < exact - tol
        worst_gap = max(worst_gap, (exact - multi) / max(abs(exact), 1.0))
    ok &= flagged < 0.1 * n
    record("1", ok, f"{'; '.join(lines)}; solve time {t_total:.1f}s; flagged K=10 {flagged}/{n}, "
                    f"single start {flagged_single}/{n}, largest signed gap {worst_gap:.2e}")


def test_criterion_2_inner_monotonicity():
    violations = 0
    for i in range(500):
        rng = np.random.default_rng(2000 + i)
        case = perturbed_garver(i % 60)
        plan = random_plan(case, rng)
        b = Budgets(int(rng.integers(0, 6)), int(rng.integers(0, 4)))
        init = sample_realizations(case, b, 1, seed=i, mode=WITHIN)[0]
        trace = coordinate_descent(case, plan, b, init=init)[2].trace
        violations += sum(c < a - 1e-9 * (1 + abs(a)) for a, c in zip(trace, trace[1:]))
    record("2", violations == 0, f"500 traces, {violations} violations")


def _shifted_cost(case, plan, r, rows, k, delta):
    lp = build_dispatch_lp(case, plan, r)
    lp.rhs[rows(lp)[k]] += delta
    sol = solve_lp(lp)
    return sol.objective if sol.status == OPTIMAL else None


def test_criterion_3_subgradient_validity():
    bad, worst = 0, 0.0
    fd_checked = fd_bad = 0
    fd_worst = 0.0
    for i in range(200):
        rng = np.random.default_rng(3000 + i)
        case = perturbed_garver(i % 60)
        plan = random_plan(case, rng)
        r1, r2 = sample_realizations(case, Budgets(5, 3), 2, seed=i, mode=WITHIN)
        model = DispatchModel(case, plan)
        d1, d2 = model.solve(r1), model.solve(r2)
        lin = (d1.operating_cost + d1.mu_d @ (r2.realized_demand - r1.realized_demand)
               + d1.mu_g @ (r2.realized_capacity - r1.realized_capacity))
        short = lin - d2.operating_cost
        worst = max(worst, short / max(1.0, abs(d2.operating_cost)))
        bad += short > 1e-6 * max(1.0, abs(d2.operating_cost))

        # finite differences on one load and one unit, central where the LP is locally linear
        for rows, k, mu, scale in ((lambda lp: lp.layout.demand_rows, int(rng.integers(len(case.loads))), d1.mu_d,
                                    case.demand_nominal),
                                   (lambda lp: lp.layout.capacity_rows, int(rng.integers(len(case.generators))),
                                    d1.mu_g, case.gen_nominal)):
            h = 1e-4 * max(scale[k], 1.0)
            up = _shifted_cost(case, plan, r1, rows, k, h)
            dn = _shifted_cost(case, plan, r1, rows, k, -h)
            if up is None or dn is None:
                continue
            fwd, bwd = (up - d1.operating_cost) / h, (d1.operating_cost - dn) / h
            if abs(fwd - bwd) > 1e-6 * max(abs(fwd), abs(bwd), 1.0):
                continue  # kink: one-sided slopes differ, no derivative to compare
            fd = 0.5 * (fwd + bwd)
            err = abs(mu[k] - fd) / max(abs(fd), 1.0)
            fd_checked += 1
            fd_bad += err > 1e-4
            fd_worst = max(fd_worst, err)
    ok = bad == 0 and fd_bad == 0 and fd_checked > 0
    record("3", ok, f"convexity: {bad}/200 violations (largest shortfall {worst:.1e}); finite differences: "
                    f"{fd_bad}/{fd_checked} disagree (largest {fd_worst:.1e})")


def test_criterion_4_taylor_exactness():
    mismatches = 0
    for i in range(1000):
        rng = np.random.default_rng(4000 + i)
        nl, ng = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        case = flat_case(nl, ng, rng)
        b = Budgets(int(rng.integers(0, min(3, nl) + 1)), int(rng.integers(0, min(3, ng) + 1)))
        if i % 2:
            disp = fake_dispatch(rng.integers(-3, 6, nl).astype(float), -rng.integers(-3, 6, ng).astype(float))
        else:
            disp = fake_dispatch(rng.normal(size=nl) * 10, -np.abs(rng.normal(size=ng)) * 10)
        r = taylor_argmax(case, b, disp)
        gd, gg = taylor_gains(case, disp)
        best_d, best_g = exhaustive_taylor(gd, gg, b.gamma_d, b.gamma_g)
        mismatches += (gd @ r.z_d + gg @ r.z_g) != best_d + best_g
    record("4", mismatches == 0, f"1000 instances, {mismatches} mismatches")


def test_criterion_5_bounds(garver_runs):
    checked, problems = 0, []
    runs = [(f"garver {bd}", r["log"], r["ocost"]) for bd, r in garver_runs.items()]
    for seed, bd in [(0, (1, 1)), (1, (2, 1)), (3, (3, 2)), (5, (2, 2)), (6, (1, 2))]:
        case = perturbed_garver(seed, n_candidates=6)
        b = Budgets(*bd)
        _, _, log = solve_robust_tnep(case, SolveConfig(budgets=b))
        runs.append((f"reduced {seed} {bd}", log, exact_robust_plan(case, b)[1]))
    for name, log, exact in runs:
        checked += 1
        lbs = log.lower_bounds
        if any(y < x - 1e-9 * (1 + abs(x)) for x, y in zip(lbs, lbs[1:])):
            problems.append(f"{name}: lower bound decreased")
        last = log.records[-1]
        if log.status not in (CONVERGED, STALLED) or last.gap > 1e-6:
            problems.append(f"{name}: status {log.status}, gap {last.gap:.2e}")
        slack = 1e-9 * (1 + abs(exact))
        if not (last.lower_bound - slack <= exact <= last.upper_bound + slack):
            problems.append(f"{name}: optimum outside [{last.lower_bound!r}, {last.upper_bound!r}]")
    record("5", not problems, f"{checked} solves checked" + ("; " + "; ".join(problems) if problems else ""))


def test_criterion_6_assessment(garver, garver_runs):
    parts, ok = [], True
    for bd in [(1, 1), (2, 1), (5, 3)]:
        b = Budgets(*bd)
        plan = garver_runs[bd]["oplan"]
        ref = exact_worst_case(garver, plan, b)[1]
        t = time.monotonic()
        rep = assess_plan(garver, plan, b, 10_000, seed=6, mode=WITHIN, worst_case_reference=ref)
        dt = time.monotonic() - t
        ok &= rep.exceedance_count == 0 and rep.infeasible_count == 0 and dt < 120
        parts.append(f"{bd}: {rep.exceedance_count} exceedances, max {rep.maximum:.4f} vs {ref:.4f}, {dt:.1f}s")
    record("6", ok, "; ".join(parts))


def test_criterion_7_zero_uncertainty(garver, garver_runs):
    r = garver_runs[(0, 0)]
    dplan, dcost = deterministic_plan(garver)
    same = r["plan"] == dplan
    diff = abs(r["log"].total_cost - dcost)
    record("7", same and diff <= 1e-9, f"same plan {same}, cost difference {diff:.1e}")


@pytest.mark.slow
def test_criterion_8_scale_smoke():
    t0 = time.monotonic()
    case = large_grid(n_buses=2000, n_lines=2500, n_candidates=100, seed=0)
    b = Budgets(50, 20)
    starts = default_starts(case, b, 0)
    r1, d1, s1 = multistart_worst_case(case, ExpansionPlan.empty(case), b, starts)
    ms = solve_master(case, [r1])
    valid = big_m_valid(case, [r1], ms)
    r2, d2, s2 = multistart_worst_case(case, ms.plan, b, default_starts(case, b, 0) + [r1])
    dt = time.monotonic() - t0
    mono = all(c >= a - 1e-9 * (1 + abs(a)) for s in (s1, s2) for a, c in zip(s.trace, s.trace[1:]))
    upper = ms.plan.investment_cost + case.sigma * d2.operating_cost
    sane = ms.total_cost <= upper + 1e-6 * max(1.0, abs(upper))
    record("8", mono and valid and sane and dt < 1800,
           f"{len(case.buses)} buses, {len(case.lines)} lines, {len(case.candidates)} candidates; "
           f"iteration in {dt:.0f}s; traces monotone {mono}; big-M valid {valid} "
           f"({ms.big_m_doublings} doublings); bounds {ms.total_cost:.6g} <= {upper:.6g}; "
           "RTS Table I targets not run (dataset unavailable, conditional)")


def test_criterion_9_cli_determinism(tmp_path):
    case = str(builtin_case_path("garver6"))
    commands = [
        ["solve", "--case", case, "--gamma-d", "2", "--gamma-g", "1", "--seed", "7"],
        ["oracle", "robust-plan", "--case", case, "--gamma-d", "1", "--gamma-g", "1"],
        ["oracle", "worst-case", "--case", case, "--gamma-d", "2", "--gamma-g", "2"],
    ]
    differing = []
    for n, argv in enumerate(commands):
        outs = [tmp_path / f"c{n}_{i}" for i in range(2)]
        for out in outs:
            assert main(argv + ["--out", str(out)]) in (0, 2)
        if not _same_tree(*outs):
            differing.append(argv[0])
    plan = tmp_path / "c0_0" / "plan.json"
    outs = [tmp_path / f"a{i}" for i in range(2)]
    for i, out in enumerate(outs):
        # the second run splits work across two processes; results must not change
        main(["assess", "--case", case, "--plan", str(plan), "--gamma-d", "2", "--gamma-g", "1", "--samples", "300",
              "--seed", "5", "--jobs", str(i + 1), "--out", str(out)])
    if not _same_tree(*outs):
        differing.append("assess")
    assert json.loads((outs[0] / "summary.json").read_text())["samples"] == 300
    record("9", not differing, "solve, oracle, assess reruns byte-identical" if not differing
           else f"differing outputs: {differing}")


def _same_tree(a, b):
    fa = {p.name: p.read_bytes() for p in a.iterdir()}
    fb = {p.name: p.read_bytes() for p in b.iterdir()}
    return fa == fb and len(fa) > 0
