"""Out-of-sample Monte Carlo check of a fixed plan.

Samples are solved in fixed-size chunks, each starting from a cold basis, so
the per-sample costs do not depend on how many workers share the chunks.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import GridCase
from .linsolve import Tolerances
from .recourse import DispatchModel, ExpansionPlan, InfeasibleDispatchError
from .uncertainty import EXACT, Budgets, Realization, sample_realizations

CHUNK = 256
EXCEED_TOL = 1e-9


@dataclass
class AssessmentReport:
    costs: np.ndarray
    feasible: np.ndarray
    worst_case_reference: float | None = None
    seed: int | None = None
    mode: str = EXACT

    @property
    def samples(self) -> int:
        return len(self.costs)

    @property
    def infeasible_count(self) -> int:
        return int((~self.feasible).sum())

    def _ok(self) -> np.ndarray:
        return self.costs[self.feasible]

    @property
    def minimum(self) -> float:
        return float(self._ok().min()) if self.feasible.any() else math.nan

    @property
    def maximum(self) -> float:
        return float(self._ok().max()) if self.feasible.any() else math.nan

    @property
    def mean(self) -> float:
        return float(self._ok().mean()) if self.feasible.any() else math.nan

    @property
    def std(self) -> float:
        return float(self._ok().std()) if self.feasible.any() else math.nan

    def exceedances(self, reference: float | None = None) -> int:
        """Feasible samples costing more than the reference beyond round-off."""
        ref = self.worst_case_reference if reference is None else reference
        if ref is None:
            return 0
        return int((self._ok() > ref + EXCEED_TOL * (1.0 + abs(ref))).sum())

    @property
    def exceedance_count(self) -> int:
        return self.exceedances()

    def summary(self) -> dict:
        return {
            "samples": self.samples, "mode": self.mode, "seed": self.seed,
            "feasible": int(self.feasible.sum()), "infeasible": self.infeasible_count,
            "min": self.minimum, "max": self.maximum, "mean": self.mean, "std": self.std,
            "worst_case_reference": self.worst_case_reference, "exceedances": self.exceedance_count,
        }

    def summary_json(self) -> str:
        doc = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in self.summary().items()}
        return json.dumps(doc, indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample_id", "cost", "feasible"])
        for i, (c, f) in enumerate(zip(self.costs, self.feasible)):
            w.writerow([i, repr(float(c)) if f else "", int(f)])
        return buf.getvalue()

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """Freedman-Diaconis histogram of the feasible costs."""
        ok = self._ok()
        if ok.size == 0:
            return np.zeros(0, dtype=int), np.zeros(0)
        if np.ptp(ok) == 0:
            edges = np.array([ok[0] - 0.5, ok[0] + 0.5])
        else:
            edges = np.histogram_bin_edges(ok, bins="fd")
        counts, edges = np.histogram(ok, bins=edges)
        return counts, edges

    def histogram_csv(self) -> str:
        counts, edges = self.histogram()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        for i, n in enumerate(counts):
            w.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(n)])
        return buf.getvalue()


def _solve_chunk(args) -> tuple[list[float], list[bool]]:
    case, plan, realizations, tol = args
    model = DispatchModel(case, plan, tol)
    costs, ok = [], []
    for r in realizations:
        try:
            costs.append(model.solve(r).operating_cost)
            ok.append(True)
        except InfeasibleDispatchError:
            model.basis = None
            costs.append(math.nan)
            ok.append(False)
    return costs, ok


def evaluate(case: GridCase, plan: ExpansionPlan, realizations: list[Realization],
             tol: Tolerances | None = None, jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    tasks = [(case, plan, realizations[i:i + CHUNK], tol) for i in range(0, len(realizations), CHUNK)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            parts = list(pool.map(_solve_chunk, tasks))
    else:
        parts = [_solve_chunk(t) for t in tasks]
    costs = np.array([c for p in parts for c in p[0]], dtype=float)
    ok = np.array([f for p in parts for f in p[1]], dtype=bool)
    return costs, ok


def assess_plan(case: GridCase, plan: ExpansionPlan, budgets: Budgets, samples: int, seed: int = 0,
                mode: str = EXACT, worst_case_reference: float | None = None,
                tol: Tolerances | None = None, jobs: int = 1) -> AssessmentReport:
    """Operating cost of ``plan`` over ``samples`` random vertices of the uncertainty set."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if len(plan.built) != len(case.candidates):
        raise ValueError(f"plan has {len(plan.built)} entries but the case has {len(case.candidates)} candidates")
    budgets.check(case)
    rs = sample_realizations(case, budgets, samples, seed=seed, mode=mode)
    costs, ok = evaluate(case, plan, rs, tol, jobs)
    return AssessmentReport(costs, ok, worst_case_reference, seed, mode)
