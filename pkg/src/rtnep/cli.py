"""Command-line front end: ``rtnep solve | assess | oracle``.

Every command writes into ``--out`` and records a ``manifest.json``.  Result
files contain no timestamps or timings unless ``--timing`` is given, so a
re-run with the same inputs and seed reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .assess import assess_plan
from .grid import CaseError, GridCase, load_case
from .linsolve import Tolerances
from .master import BigMPolicy
from .oracle import OracleBudget, OracleCapError, exact_robust_plan, exact_worst_case
from .pccg import CONVERGED, SolveConfig, solve_robust_tnep
from .recourse import ExpansionPlan, InfeasibleDispatchError
from .uncertainty import EXACT, WITHIN, Budgets, BudgetError, vertex_count

EXIT_OK, EXIT_ERROR, EXIT_LIMIT, EXIT_CAP = 0, 1, 2, 3

log = logging.getLogger("rtnep")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2 (2 means a solver limit here)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _env_float(name: str, default: float) -> float:
    v = os.environ.get(name)
    if v is None or v == "":
        return default
    try:
        return float(v)
    except ValueError as exc:
        raise UsageError(f"environment variable {name}={v!r} is not a number") from exc


def _tolerances(args) -> Tolerances:
    feas = _env_float("RTNEP_FEAS_TOL", Tolerances.feas_tol)
    gap = _env_float("RTNEP_MIP_GAP", Tolerances.mip_gap_tol)
    return Tolerances(feas_tol=feas, opt_tol=feas, mip_gap_tol=gap)


def _case(args) -> tuple[GridCase, str]:
    path = Path(args.case)
    raw = path.read_bytes()
    case = load_case(path, args.format)
    changes = {}
    if getattr(args, "budget", None) is not None:
        changes["investment_budget"] = math.inf if args.budget < 0 else args.budget
    if getattr(args, "sigma", None) is not None:
        if not args.sigma > 0:
            raise UsageError("--sigma must be positive")
        changes["sigma"] = args.sigma
    if changes:
        case = case.with_changes(**changes)
    return case, hashlib.sha256(raw).hexdigest()


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def _manifest(out: Path, command: str, config: dict, checksum: str, seed, args, started: float) -> None:
    doc = {
        "tool": "rtnep", "version": __version__, "command": command, "case": str(args.case),
        "case_sha256": checksum, "seed": seed, "config": config,
    }
    if args.timing:
        doc["started"] = time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started))
        doc["elapsed_s"] = round(time.time() - started, 3)
    _write(out, "manifest.json", _json(doc))


def _budgets(args, case: GridCase) -> Budgets:
    b = Budgets(args.gamma_d, args.gamma_g)
    b.check(case)
    return b


def _realization_doc(case: GridCase, r, cost: float | None = None) -> dict:
    doc = r.to_dict()
    doc["load_ids"] = [d.id for d in case.loads]
    doc["generator_ids"] = [g.id for g in case.generators]
    if cost is not None:
        doc["operating_cost"] = cost
    return doc


def cmd_solve(args) -> int:
    started = time.time()
    case, checksum = _case(args)
    b = _budgets(args, case)
    tol = _tolerances(args)
    eps_ol = args.eps_ol if args.eps_ol is not None else _env_float("RTNEP_EPS_OL", SolveConfig.eps_ol)
    eps_il = args.eps_il if args.eps_il is not None else _env_float("RTNEP_EPS_IL", SolveConfig.eps_il)
    policy = BigMPolicy(args.big_m, args.theta_span) if args.theta_span else BigMPolicy(args.big_m)
    config = SolveConfig(budgets=b, eps_ol=eps_ol, eps_il=eps_il, multistart=args.multistart, seed=args.seed,
                         max_outer=args.max_outer, time_limit=args.time_limit or math.inf,
                         big_m_policy=policy, tol=tol, jobs=args.jobs)
    plan, worst, slog = solve_robust_tnep(case, config)
    out = Path(args.out)
    last = slog.records[-1]
    rec = next((r for r in slog.records if r.plan == plan and r.realization == worst), last)
    pdoc = plan.to_dict(case)
    pdoc.update(total_cost=slog.total_cost, worst_cost=rec.worst_cost, lower_bound=last.lower_bound,
                status=slog.status, iterations=len(slog.records))
    _write(out, "plan.json", _json(pdoc))
    _write(out, "worst.json", _json(_realization_doc(case, worst, rec.worst_cost)))
    _write(out, "log.csv", slog.to_csv(args.timing))
    _write(out, "log.json", slog.to_json(args.timing))
    _manifest(out, "solve", {**config.to_dict(), "sigma": case.sigma,
                             "investment_budget": None if math.isinf(case.investment_budget) else case.investment_budget},
              checksum, args.seed, args, started)
    print(f"{slog.status}: total cost {slog.total_cost!r}, {len(slog.records)} iterations, "
          f"{sum(plan.built)} lines built")
    return EXIT_OK if slog.status == CONVERGED else EXIT_LIMIT


def _load_plan(path: str, case: GridCase) -> tuple[ExpansionPlan, dict]:
    doc = json.loads(Path(path).read_text())
    built = doc["built"] if isinstance(doc, dict) else doc
    if len(built) != len(case.candidates):
        raise UsageError(f"plan has {len(built)} entries but the case has {len(case.candidates)} candidate lines")
    return ExpansionPlan.from_vector(case, built), doc if isinstance(doc, dict) else {}


def cmd_assess(args) -> int:
    started = time.time()
    case, checksum = _case(args)
    b = _budgets(args, case)
    plan, pdoc = _load_plan(args.plan, case)
    ref = args.reference if args.reference is not None else pdoc.get("worst_cost")
    mode = EXACT if args.mode == "exact" else WITHIN
    rep = assess_plan(case, plan, b, args.samples, args.seed, mode, ref, _tolerances(args), args.jobs)
    out = Path(args.out)
    _write(out, "assess.csv", rep.to_csv())
    _write(out, "histogram.csv", rep.histogram_csv())
    _write(out, "summary.json", rep.summary_json())
    _manifest(out, "assess", {"gamma_d": b.gamma_d, "gamma_g": b.gamma_g, "samples": args.samples,
                              "mode": mode, "plan": list(plan.built), "reference": ref}, checksum, args.seed,
              args, started)
    print(f"{rep.samples} samples: mean {rep.mean!r}, max {rep.maximum!r}, "
          f"{rep.exceedance_count} exceedances, {rep.infeasible_count} infeasible")
    return EXIT_OK


def cmd_oracle(args) -> int:
    started = time.time()
    case, checksum = _case(args)
    b = _budgets(args, case)
    out = Path(args.out)
    tol = _tolerances(args)
    n_vert = vertex_count(case, b)
    if args.which == "worst-case":
        plan = _load_plan(args.plan, case)[0] if args.plan else ExpansionPlan.empty(case)
        r, cost = exact_worst_case(case, plan, b, args.cap, tol)
        _write(out, "worst.json", _json(_realization_doc(case, r, cost)))
        print(f"worst operating cost {cost!r} over {n_vert} vertices")
    else:
        caps = OracleBudget(max_vertices=args.cap, max_plans=args.plan_cap)
        plan, total = exact_robust_plan(case, b, caps, tol)
        r, cost = exact_worst_case(case, plan, b, args.cap, tol)
        pdoc = plan.to_dict(case)
        pdoc.update(total_cost=total, worst_cost=cost)
        _write(out, "plan.json", _json(pdoc))
        _write(out, "worst.json", _json(_realization_doc(case, r, cost)))
        print(f"robust total cost {total!r}, {sum(plan.built)} lines built")
    _manifest(out, f"oracle {args.which}", {"gamma_d": b.gamma_d, "gamma_g": b.gamma_g, "cap": args.cap,
                                            "vertices": n_vert}, checksum, None, args, started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rtnep", description="Robust transmission expansion planning under budgeted uncertainty.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, out_default):
        sp.add_argument("--case", required=True, help="case file (.json native, .m matpower-like)")
        sp.add_argument("--format", choices=["native-json", "matpower-like"], default=None)
        sp.add_argument("--gamma-d", type=int, required=True)
        sp.add_argument("--gamma-g", type=int, required=True)
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--timing", action="store_true", help="record timestamps and wall times")

    s = sub.add_parser("solve", help="robust plan by column-and-constraint generation")
    common(s, "out")
    s.add_argument("--budget", type=float, help="investment budget override (negative: unlimited)")
    s.add_argument("--sigma", type=float, help="operating-cost weight override")
    s.add_argument("--eps-ol", type=float)
    s.add_argument("--eps-il", type=float)
    s.add_argument("--multistart", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-outer", type=int, default=50)
    s.add_argument("--time-limit", type=float, default=None, help="seconds")
    s.add_argument("--big-m", choices=["path", "fixed"], default="path")
    s.add_argument("--theta-span", type=float, default=None, help="angle span (rad) for --big-m fixed")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("assess", help="Monte Carlo check of a plan")
    common(a, "out")
    a.add_argument("--plan", required=True, help="plan.json from solve or oracle")
    a.add_argument("--samples", type=int, required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--mode", choices=["exact", "within"], default="exact")
    a.add_argument("--reference", type=float, default=None, help="worst-case cost (default: from the plan file)")
    a.add_argument("--budget", type=float)
    a.add_argument("--sigma", type=float)
    a.add_argument("--jobs", type=int, default=1)
    a.set_defaults(func=cmd_assess)

    o = sub.add_parser("oracle", help="brute-force ground truth")
    o.add_argument("which", choices=["worst-case", "robust-plan"])
    common(o, "out")
    o.add_argument("--cap", type=int, default=1_000_000, help="maximum number of uncertainty vertices")
    o.add_argument("--plan-cap", type=int, default=1 << 20, help="maximum number of plans (2^candidates)")
    o.add_argument("--plan", default=None, help="plan.json for worst-case (default: no lines built)")
    o.add_argument("--budget", type=float)
    o.add_argument("--sigma", type=float)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a command is required")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
        if getattr(args, "samples", 1) < 1:
            raise UsageError("--samples must be at least 1")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except OracleCapError as exc:
        print(f"oracle refused: {exc} (count {exc.count}, cap {exc.cap})", file=sys.stderr)
        return EXIT_CAP
    except (CaseError, BudgetError, InfeasibleDispatchError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
