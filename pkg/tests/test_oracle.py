import math

import numpy as np
import pytest

from oracles import dispatch_highs, subsets
from rtnep.grid import Bus, Generator, GridCase, Load
from rtnep.oracle import (
    OracleBudget, OracleCapError, exact_robust_plan, exact_worst_case, feasible_plans, robust_cost_of,
)
from rtnep.recourse import ExpansionPlan
from rtnep.synthetic import perturbed_garver, random_plan
from rtnep.uncertainty import Budgets, nominal
from rtnep.worstcase import coordinate_descent


def highs_worst(case, plan, b):
    best = -math.inf
    for zd in subsets(len(case.loads), b.gamma_d):
        for zg in subsets(len(case.generators), b.gamma_g):
            pd = case.demand_nominal + case.demand_deviation * zd
            pg = case.gen_nominal - case.gen_deviation * zg
            best = max(best, dispatch_highs(case, plan.built, pd, pg)[0])
    return best


def test_zero_budget_nominal(garver):
    r, c = exact_worst_case(garver, ExpansionPlan.empty(garver), Budgets(0, 0))
    assert r == nominal(garver)


def test_single_load_monotone():
    case = GridCase((Bus(1),), (), (Generator(1, 0, 10.0, 100.0, 0.0),), (Load(1, 0, 500.0, 40.0, 8.0, 1.0),),
                    math.inf, 1.0, 100.0)
    r, c = exact_worst_case(case, ExpansionPlan.empty(case), Budgets(1, 0))
    assert r.z_d.tolist() == [1] and c == pytest.approx(480.0)
    # zero marginal cost: raising the load does not raise the cost, lowest z wins the tie
    free = case.with_changes(generators=(Generator(1, 0, 0.0, 100.0, 0.0),))
    r, c = exact_worst_case(free, ExpansionPlan.empty(free), Budgets(1, 0))
    assert r.z_d.tolist() == [0] and c == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_worst_case_matches_highs_enumeration(seed):
    case = perturbed_garver(seed)
    plan = random_plan(case, np.random.default_rng(seed))
    b = Budgets(2, 1)
    _, c = exact_worst_case(case, plan, b)
    assert c == pytest.approx(highs_worst(case, plan, b), rel=1e-9)
    assert c >= coordinate_descent(case, plan, b)[1].operating_cost - 1e-9 * c


def test_vertex_cap(garver):
    with pytest.raises(OracleCapError) as exc:
        exact_worst_case(garver, ExpansionPlan.empty(garver), Budgets(5, 3), cap=100)
    assert exc.value.count == 256
    with pytest.raises(OracleCapError):
        list(feasible_plans(garver, cap=1000))
    with pytest.raises(ValueError):
        OracleBudget(max_vertices=0)


def test_no_candidates(garver):
    case = garver.with_changes(lines=tuple(garver.lines[k] for k in garver.existing))
    plan, cost = exact_robust_plan(case, Budgets(1, 1))
    assert plan.built == ()
    _, worst = exact_worst_case(case, plan, Budgets(1, 1))
    assert cost == pytest.approx(case.sigma * worst)


def test_budget_below_cheapest(garver):
    case = garver.with_changes(investment_budget=float(garver.candidate_costs.min()) - 1.0)
    plan, cost = exact_robust_plan(case, Budgets(1, 1))
    assert sum(plan.built) == 0


@pytest.mark.parametrize("seed", range(3))
def test_robust_plan_is_argmin(seed):
    case = perturbed_garver(seed, n_candidates=4)
    b = Budgets(1, 1)
    plan, cost = exact_robust_plan(case, b)
    # brute force without pruning, using the independent HiGHS dispatch
    ref = min(p.investment_cost + case.sigma * highs_worst(case, p, b) for p in feasible_plans(case))
    assert cost == pytest.approx(ref, rel=1e-9)
    assert robust_cost_of(case, plan, b) == pytest.approx(cost, rel=1e-12)
