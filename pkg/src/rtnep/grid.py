"""Power network planning instance: types, validation and case-file I/O."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

EXISTING = "existing"
CANDIDATE = "candidate"


class CaseError(ValueError):
    """Case file could not be parsed."""


class CaseValidationError(CaseError):
    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        lines = "\n".join(f"  - {v}" for v in violations)
        super().__init__(f"{len(violations)} invariant violation(s):\n{lines}")


@dataclass(frozen=True)
class Violation:
    kind: str          # element type: bus, line, generator, load, case
    id: Any            # external id of the element (None for case-level)
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        where = self.kind if self.id is None else f"{self.kind} {self.id}"
        return f"{where}: {self.message}" + (" (warning)" if self.severity != "error" else "")


@dataclass(frozen=True)
class Bus:
    id: int


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int      # internal bus index
    to_bus: int
    reactance: float   # per unit on the case base
    capacity: float    # MW
    status: str = EXISTING
    build_cost: float | None = None

    @property
    def is_candidate(self) -> bool:
        return self.status == CANDIDATE


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    marginal_cost: float
    nominal_capacity: float
    capacity_deviation: float = 0.0


@dataclass(frozen=True)
class Load:
    id: int
    bus: int
    marginal_shed_cost: float
    nominal_demand: float
    demand_deviation: float = 0.0
    shed_fraction: float = 1.0


@dataclass(frozen=True)
class GridCase:
    """Immutable planning instance.

    Element ``bus`` fields hold internal bus indices ``0..N-1``; ``bus_ids``
    maps them back to the ids used in the source file.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    investment_budget: float = math.inf
    sigma: float = 1.0
    base_mva: float = 100.0
    name: str = field(default="case", compare=False)

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @cached_property
    def existing(self) -> tuple[int, ...]:
        """Positions (into ``lines``) of existing lines."""
        return tuple(k for k, ln in enumerate(self.lines) if not ln.is_candidate)

    @cached_property
    def candidates(self) -> tuple[int, ...]:
        """Positions (into ``lines``) of candidate lines; plan vectors follow this order."""
        return tuple(k for k, ln in enumerate(self.lines) if ln.is_candidate)

    @cached_property
    def candidate_costs(self) -> np.ndarray:
        return np.array([self.lines[k].build_cost or 0.0 for k in self.candidates], dtype=float)

    @cached_property
    def gen_cost(self) -> np.ndarray:
        return np.array([g.marginal_cost for g in self.generators], dtype=float)

    @cached_property
    def gen_nominal(self) -> np.ndarray:
        return np.array([g.nominal_capacity for g in self.generators], dtype=float)

    @cached_property
    def gen_deviation(self) -> np.ndarray:
        return np.array([g.capacity_deviation for g in self.generators], dtype=float)

    @cached_property
    def shed_cost(self) -> np.ndarray:
        return np.array([d.marginal_shed_cost for d in self.loads], dtype=float)

    @cached_property
    def demand_nominal(self) -> np.ndarray:
        return np.array([d.nominal_demand for d in self.loads], dtype=float)

    @cached_property
    def demand_deviation(self) -> np.ndarray:
        return np.array([d.demand_deviation for d in self.loads], dtype=float)

    @cached_property
    def shed_fraction(self) -> np.ndarray:
        return np.array([d.shed_fraction for d in self.loads], dtype=float)

    def with_changes(self, **kwargs) -> "GridCase":
        from dataclasses import replace
        return replace(self, **kwargs)


# -- validation -------------------------------------------------------------------

def validate(case: GridCase) -> list[Violation]:
    """Return every violated invariant, ordered by (element type, id).

    Shedding cost not above every generator cost is reported with severity
    ``"warning"``; everything else is an error.
    """
    out: list[Violation] = []
    nb = len(case.buses)
    seen: set[int] = set()
    for b in case.buses:
        if b.id in seen:
            out.append(Violation("bus", b.id, "duplicate bus id"))
        seen.add(b.id)

    def bus_ok(i) -> bool:
        return isinstance(i, (int, np.integer)) and 0 <= i < nb

    def fin(v) -> bool:
        return v is not None and math.isfinite(v)

    ids: set[int] = set()
    for ln in case.lines:
        if ln.id in ids:
            out.append(Violation("line", ln.id, "duplicate line id"))
        ids.add(ln.id)
        if not bus_ok(ln.from_bus) or not bus_ok(ln.to_bus):
            out.append(Violation("line", ln.id, "endpoint references unknown bus"))
        elif ln.from_bus == ln.to_bus:
            out.append(Violation("line", ln.id, "from_bus equals to_bus"))
        if not fin(ln.reactance) or ln.reactance <= 0:
            out.append(Violation("line", ln.id, "nonpositive reactance"))
        if not fin(ln.capacity) or ln.capacity < 0:
            out.append(Violation("line", ln.id, "capacity must be finite and nonnegative"))
        if ln.status not in (EXISTING, CANDIDATE):
            out.append(Violation("line", ln.id, f"unknown status {ln.status!r}"))
        if ln.status == CANDIDATE and ln.build_cost is None:
            out.append(Violation("line", ln.id, "candidate line missing build_cost"))
        if ln.status == EXISTING and ln.build_cost is not None:
            out.append(Violation("line", ln.id, "existing line must not carry build_cost"))
        if ln.build_cost is not None and (not fin(ln.build_cost) or ln.build_cost < 0):
            out.append(Violation("line", ln.id, "build_cost must be finite and nonnegative"))

    ids = set()
    for g in case.generators:
        if g.id in ids:
            out.append(Violation("generator", g.id, "duplicate generator id"))
        ids.add(g.id)
        if not bus_ok(g.bus):
            out.append(Violation("generator", g.id, "references unknown bus"))
        if not fin(g.marginal_cost) or g.marginal_cost < 0:
            out.append(Violation("generator", g.id, "marginal_cost must be nonnegative"))
        if not fin(g.nominal_capacity) or g.nominal_capacity < 0:
            out.append(Violation("generator", g.id, "nominal_capacity must be nonnegative"))
        if not fin(g.capacity_deviation) or g.capacity_deviation < 0:
            out.append(Violation("generator", g.id, "capacity_deviation must be nonnegative"))
        elif fin(g.nominal_capacity) and g.capacity_deviation > g.nominal_capacity:
            out.append(Violation("generator", g.id, "capacity_deviation exceeds nominal_capacity"))

    max_gen_cost = max((g.marginal_cost for g in case.generators if fin(g.marginal_cost)), default=-math.inf)
    ids = set()
    for d in case.loads:
        if d.id in ids:
            out.append(Violation("load", d.id, "duplicate load id"))
        ids.add(d.id)
        if not bus_ok(d.bus):
            out.append(Violation("load", d.id, "references unknown bus"))
        if not fin(d.marginal_shed_cost) or d.marginal_shed_cost < 0:
            out.append(Violation("load", d.id, "marginal_shed_cost must be nonnegative"))
        elif d.marginal_shed_cost <= max_gen_cost:
            out.append(Violation("load", d.id, "shed cost not above every generator cost", "warning"))
        if not fin(d.nominal_demand) or d.nominal_demand < 0:
            out.append(Violation("load", d.id, "nominal_demand must be nonnegative"))
        if not fin(d.demand_deviation) or d.demand_deviation < 0:
            out.append(Violation("load", d.id, "demand_deviation must be nonnegative"))
        if not fin(d.shed_fraction) or not 0.0 <= d.shed_fraction <= 1.0:
            out.append(Violation("load", d.id, "shed_fraction outside [0, 1]"))

    if math.isnan(case.investment_budget) or case.investment_budget < 0:
        out.append(Violation("case", None, "investment_budget must be nonnegative"))
    if not fin(case.sigma) or case.sigma <= 0:
        out.append(Violation("case", None, "sigma must be positive"))
    if not fin(case.base_mva) or case.base_mva <= 0:
        out.append(Violation("case", None, "base_mva must be positive"))

    order = {"case": 0, "bus": 1, "line": 2, "generator": 3, "load": 4}
    return sorted(out, key=lambda v: (order[v.kind], -1 if v.id is None else v.id))


def errors(case: GridCase) -> list[Violation]:
    return [v for v in validate(case) if v.severity == "error"]


# -- native JSON format -------------------------------------------------------------

_TOP_KEYS = {"base_mva", "sigma", "investment_budget", "buses", "lines", "generators", "loads"}
_KEYS = {
    "buses": ({"id"}, set()),
    "lines": ({"id", "from", "to", "x", "fmax", "status"}, {"build_cost"}),
    "generators": ({"id", "bus", "cost", "pmax_nominal", "delta"}, set()),
    "loads": ({"id", "bus", "shed_cost", "demand_nominal", "delta", "gamma"}, set()),
}


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise CaseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise CaseError(f"{where}: expected an integer id, got {v!r}")
    return v


def case_from_dict(doc: dict, name: str = "case") -> GridCase:
    """Build an (unvalidated) :class:`GridCase` from a native-format document."""
    if not isinstance(doc, dict):
        raise CaseError("top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise CaseError(f"unknown top-level key(s): {sorted(unknown)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise CaseError(f"missing top-level key(s): {sorted(missing)}")
    for section, (required, optional) in _KEYS.items():
        if not isinstance(doc[section], list):
            raise CaseError(f"{section}: expected an array")
        for k, item in enumerate(doc[section]):
            where = f"{section}[{k}]"
            if not isinstance(item, dict):
                raise CaseError(f"{where}: expected an object")
            extra = set(item) - required - optional
            if extra:
                raise CaseError(f"{where}: unknown key(s) {sorted(extra)}")
            lack = required - set(item)
            if lack:
                raise CaseError(f"{where}: missing key(s) {sorted(lack)}")

    bus_ids = [_int(b["id"], f"buses[{k}].id") for k, b in enumerate(doc["buses"])]
    index = {}
    for i, b in enumerate(bus_ids):
        index.setdefault(b, i)

    def bus_ref(v, where):
        v = _int(v, where)
        # unknown ids map to -1 so validation reports them
        return index.get(v, -1)

    lines = []
    for k, ln in enumerate(doc["lines"]):
        w = f"lines[{k}]"
        status = ln["status"]
        if status not in (EXISTING, CANDIDATE):
            raise CaseError(f"{w}.status: expected 'existing' or 'candidate', got {status!r}")
        cost = ln.get("build_cost")
        lines.append(Line(
            id=_int(ln["id"], f"{w}.id"), from_bus=bus_ref(ln["from"], f"{w}.from"),
            to_bus=bus_ref(ln["to"], f"{w}.to"), reactance=_num(ln["x"], f"{w}.x"),
            capacity=_num(ln["fmax"], f"{w}.fmax"), status=status,
            build_cost=None if cost is None else _num(cost, f"{w}.build_cost")))
    gens = [Generator(id=_int(g["id"], f"generators[{k}].id"), bus=bus_ref(g["bus"], f"generators[{k}].bus"),
                      marginal_cost=_num(g["cost"], f"generators[{k}].cost"),
                      nominal_capacity=_num(g["pmax_nominal"], f"generators[{k}].pmax_nominal"),
                      capacity_deviation=_num(g["delta"], f"generators[{k}].delta"))
            for k, g in enumerate(doc["generators"])]
    loads = [Load(id=_int(d["id"], f"loads[{k}].id"), bus=bus_ref(d["bus"], f"loads[{k}].bus"),
                  marginal_shed_cost=_num(d["shed_cost"], f"loads[{k}].shed_cost"),
                  nominal_demand=_num(d["demand_nominal"], f"loads[{k}].demand_nominal"),
                  demand_deviation=_num(d["delta"], f"loads[{k}].delta"),
                  shed_fraction=_num(d["gamma"], f"loads[{k}].gamma"))
             for k, d in enumerate(doc["loads"])]
    budget = doc["investment_budget"]
    return GridCase(
        buses=tuple(Bus(b) for b in bus_ids), lines=tuple(lines), generators=tuple(gens),
        loads=tuple(loads),
        investment_budget=math.inf if budget is None else _num(budget, "investment_budget"),
        sigma=_num(doc["sigma"], "sigma"), base_mva=_num(doc["base_mva"], "base_mva"), name=name)


def case_to_dict(case: GridCase) -> dict:
    ids = case.bus_ids

    def line(ln: Line) -> dict:
        d = {"id": ln.id, "from": ids[ln.from_bus], "to": ids[ln.to_bus], "x": ln.reactance,
             "fmax": ln.capacity, "status": ln.status}
        if ln.build_cost is not None:
            d["build_cost"] = ln.build_cost
        return d

    return {
        "base_mva": case.base_mva,
        "sigma": case.sigma,
        "investment_budget": None if math.isinf(case.investment_budget) else case.investment_budget,
        "buses": [{"id": b.id} for b in case.buses],
        "lines": [line(ln) for ln in case.lines],
        "generators": [{"id": g.id, "bus": ids[g.bus], "cost": g.marginal_cost,
                        "pmax_nominal": g.nominal_capacity, "delta": g.capacity_deviation}
                       for g in case.generators],
        "loads": [{"id": d.id, "bus": ids[d.bus], "shed_cost": d.marginal_shed_cost,
                   "demand_nominal": d.nominal_demand, "delta": d.demand_deviation, "gamma": d.shed_fraction}
                  for d in case.loads],
    }


def serialize(case: GridCase) -> str:
    """Native JSON text; ``load_case`` on the result reproduces ``case`` exactly."""
    return json.dumps(case_to_dict(case), indent=1) + "\n"


def save_case(case: GridCase, path: str | Path) -> None:
    Path(path).write_text(serialize(case), encoding="utf-8")


def parse_case(text: str, fmt: str = "native-json", name: str = "case") -> GridCase:
    if fmt in ("native-json", "json"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CaseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        case = case_from_dict(doc, name)
    elif fmt in ("matpower-like", "matpower"):
        case = parse_matpower(text, name)
    else:
        raise ValueError(f"unknown case format {fmt!r}")
    errs = errors(case)
    if errs:
        raise CaseValidationError(errs)
    return case


def load_case(path: str | Path, fmt: str | None = None) -> GridCase:
    """Read and validate a case file.

    ``fmt`` defaults from the extension: ``.m`` is matpower-like, anything else
    native JSON.
    """
    path = Path(path)
    if fmt is None:
        fmt = "matpower-like" if path.suffix == ".m" else "native-json"
    return parse_case(path.read_text(encoding="utf-8"), fmt, name=path.stem)


# -- matpower-like importer ---------------------------------------------------------

UNLIMITED_RATING = 9999.0

_MATRIX = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")


def _matrix_rows(body: str, name: str, text: str, start: int) -> list[list[float]]:
    rows = []
    line0 = text.count("\n", 0, start) + 1
    for k, raw in enumerate(body.split("\n")):
        raw = raw.split("%", 1)[0]
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                rows.append([float(tok) for tok in re.split(r"[\s,]+", chunk)])
            except ValueError as exc:
                raise CaseError(f"line {line0 + k}: bad number in mpc.{name}: {exc}") from None
    return rows


def parse_matpower(text: str, name: str = "case") -> GridCase:
    """Import a MATPOWER-style ``.m`` case.

    Standard ``bus``/``gen``/``branch``/``gencost`` matrices are read.  Branch
    rows with status 0 are candidate lines; their build costs come from the
    companion table ``mpc.candidate = [branch_row build_cost]`` (1-based row
    numbers).  ``mpc.tnep = [sigma budget shed_cost demand_dev gen_dev gamma]``
    supplies planning data; deviations are fractions of the nominal values.
    ``mpc.uncertain_gen``/``mpc.uncertain_load`` optionally list the 1-based
    rows that fluctuate (all by default).
    """
    mats, scal = {}, {}
    for m in _MATRIX.finditer(text):
        mats[m.group(1)] = _matrix_rows(m.group(2), m.group(1), text, m.start())
    for m in _SCALAR.finditer(text):
        scal[m.group(1)] = float(m.group(2))
    for key in ("bus", "gen", "branch", "tnep"):
        if key not in mats:
            raise CaseError(f"missing mpc.{key}")
    base = scal.get("baseMVA", 100.0)
    tnep = mats["tnep"][0]
    if len(tnep) != 6:
        raise CaseError("mpc.tnep must have 6 entries: sigma budget shed_cost demand_dev gen_dev gamma")
    sigma, budget, shed_cost, ddev, gdev, gamma = tnep
    budget = math.inf if budget < 0 else budget
    bus_ids = [int(r[0]) for r in mats["bus"]]
    index = {b: i for i, b in enumerate(bus_ids)}
    unc_load = {int(v) for r in mats.get("uncertain_load", []) for v in r}
    unc_gen = {int(v) for r in mats.get("uncertain_gen", []) for v in r}

    loads = []
    for k, r in enumerate(mats["bus"]):
        if len(r) > 2 and r[2] > 0:
            dev = ddev * r[2] if (not unc_load or k + 1 in unc_load) else 0.0
            loads.append(Load(id=bus_ids[k], bus=k, marginal_shed_cost=shed_cost, nominal_demand=r[2],
                              demand_deviation=dev, shed_fraction=gamma))
    costs = mats.get("gencost", [])
    gens = []
    for k, r in enumerate(mats["gen"]):
        if len(r) > 7 and r[7] <= 0:
            continue
        c = 0.0
        if k < len(costs):
            row = costs[k]
            ncoef = int(row[3])
            coefs = row[4:4 + ncoef]
            c = coefs[-2] if ncoef >= 2 else 0.0
        pmax = r[8]
        dev = gdev * pmax if (not unc_gen or k + 1 in unc_gen) else 0.0
        gens.append(Generator(id=k + 1, bus=index.get(int(r[0]), -1), marginal_cost=c,
                              nominal_capacity=pmax, capacity_deviation=dev))
    cand_cost = {int(r[0]): r[1] for r in mats.get("candidate", [])}
    lines = []
    for k, r in enumerate(mats["branch"]):
        status = CANDIDATE if len(r) > 10 and r[10] == 0 else EXISTING
        # rateA = 0 means unlimited in MATPOWER
        cap = r[5] if r[5] > 0 else UNLIMITED_RATING
        lines.append(Line(id=k + 1, from_bus=index.get(int(r[0]), -1), to_bus=index.get(int(r[1]), -1),
                          reactance=r[3], capacity=cap, status=status,
                          build_cost=cand_cost.get(k + 1) if status == CANDIDATE else None))
    return GridCase(tuple(Bus(b) for b in bus_ids), tuple(lines), tuple(gens), tuple(loads),
                    investment_budget=budget, sigma=sigma, base_mva=base, name=name)


def builtin_case_path(name: str) -> Path:
    return Path(__file__).with_name("data") / f"{name}.json"


def garver6() -> GridCase:
    """The bundled Garver 6-bus desk case."""
    return load_case(builtin_case_path("garver6"))
