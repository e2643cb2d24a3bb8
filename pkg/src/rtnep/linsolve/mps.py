"""Fixed-format MPS export for cross-checking models in external solvers.

Fixed format limits names to eight characters, so rows and columns are written
as ``R#######`` and ``C#######``; the original names follow as comment lines.
"""

from __future__ import annotations

from pathlib import Path

from .model import EQ, GE, INF, LE, LinearProgram, MixedIntegerProgram

_SENSE = {EQ: "E", LE: "L", GE: "G"}


def _num(v: float) -> str:
    s = f"{v:.12g}"
    return s if len(s) <= 12 else f"{v:.6e}"


def to_mps(model: LinearProgram | MixedIntegerProgram) -> str:
    if isinstance(model, MixedIntegerProgram):
        lp, ints = model.lp, set(model.binaries)
    else:
        lp, ints = model, set()
    col = [f"C{j:07d}" for j in range(lp.num_vars)]
    row = [f"R{i:07d}" for i in range(lp.num_rows)]
    out = [f"NAME          {lp.name[:8].upper() or 'MODEL'}"]
    out += [f"* {col[j]} {lp.var_names[j]}" for j in range(lp.num_vars)]
    out += [f"* {row[i]} {lp.row_names[i]}" for i in range(lp.num_rows)]
    out.append("ROWS")
    out.append(" N  COST")
    out += [f" {_SENSE[lp.senses[i]]}  {row[i]}" for i in range(lp.num_rows)]
    out.append("COLUMNS")
    A = lp.matrix().tocsc()
    in_int = False
    for j in range(lp.num_vars):
        if (j in ints) != in_int:
            in_int = j in ints
            out.append(f"    MARKER                 'MARKER'                 '{'INTORG' if in_int else 'INTEND'}'")
        entries = [("COST", lp.cost[j])] if lp.cost[j] != 0 else []
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries += [(row[i], float(v)) for i, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        if not entries:
            entries = [("COST", 0.0)]
        for k in range(0, len(entries), 2):
            out.append("    " + f"{col[j]:<8}" + "".join(
                f"  {n:<8}  {_num(v):>12}" for n, v in entries[k:k + 2]))
    if in_int:
        out.append("    MARKER                 'MARKER'                 'INTEND'")
    out.append("RHS")
    nz = [(row[i], float(v)) for i, v in enumerate(lp.rhs) if v != 0]
    for k in range(0, len(nz), 2):
        out.append("    RHS     " + "".join(f"  {n:<8}  {_num(v):>12}" for n, v in nz[k:k + 2]))
    out.append("BOUNDS")
    for j in range(lp.num_vars):
        lb, ub = lp.lb[j], lp.ub[j]
        if lb == -INF and ub == INF:
            out.append(f" FR BND       {col[j]}")
            continue
        if lb == ub:
            out.append(f" FX BND       {col[j]:<8}  {_num(lb):>12}")
            continue
        if lb == -INF:
            out.append(f" MI BND       {col[j]}")
        elif lb != 0:
            out.append(f" LO BND       {col[j]:<8}  {_num(lb):>12}")
        if ub != INF:
            out.append(f" UP BND       {col[j]:<8}  {_num(ub):>12}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def write_mps(model: LinearProgram | MixedIntegerProgram, path: str | Path) -> None:
    Path(path).write_text(to_mps(model))

