"""Fixed-column MPS writer and reader.

Long row/column names are mangled to ``R0000001`` / ``C0000001`` and the
mapping is published as ``* MAP <short> <long>`` comment lines before the NAME
card, so the reader can restore the original names.  Numbers use 12
significant digits; a number wider than its 12-character field simply extends
the line (one coefficient per line, so no later field is displaced).
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .model import LinearProgram, LPError

OBJ_ROW = "COST"
RHS_SET = "RHS"
BOUND_SET = "BND"
_MAX_INDEX = 9_999_999


def _num(v: float) -> str:
    s = format(float(v), ".12g")
    return "0" if s == "-0" else s


def _short(prefix: str, i: int) -> str:
    if i + 1 > _MAX_INDEX:
        raise LPError("too many rows/columns for 8-character MPS names")
    return f"{prefix}{i + 1:07d}"


def mangling_table(lp: LinearProgram) -> list[tuple[str, str]]:
    rows = [(_short("R", i), name) for i, name in enumerate(lp.row_names)]
    cols = [(_short("C", j), name) for j, name in enumerate(lp.col_names)]
    return rows + cols


def _line(f1: str = "", f2: str = "", f3: str = "", f4: str = "") -> str:
    # fields start at columns 2, 5, 15 and 25
    out = " " + f1.ljust(2) + " " + f2.ljust(8)
    if f3 or f4:
        out += "  " + f3.ljust(8) + "  " + f4.rjust(12)
    return out.rstrip()


def format_interchange(lp: LinearProgram) -> str:
    out = ["* gridplan LP interchange file (fixed MPS)"]
    for short, long in mangling_table(lp):
        out.append(f"* MAP {short} {long}")
    out.append(f"NAME          {lp.name[:8] or 'MODEL'}")
    out.append("ROWS")
    out.append(_line("N", OBJ_ROW))
    for i, s in enumerate(lp.senses):
        out.append(_line(s, _short("R", i)))
    out.append("COLUMNS")
    A = lp.A.tocsc()
    for j in range(lp.n_cols):
        cname = _short("C", j)
        start, end = A.indptr[j], A.indptr[j + 1]
        if lp.c[j] != 0.0 or start == end:
            out.append(_line("", cname, OBJ_ROW, _num(lp.c[j])))
        for i, v in zip(A.indices[start:end], A.data[start:end]):
            out.append(_line("", cname, _short("R", int(i)), _num(v)))
    out.append("RHS")
    for i, v in enumerate(lp.b):
        if v != 0.0:
            out.append(_line("", RHS_SET, _short("R", i), _num(v)))
    out.append("RANGES")
    out.append("BOUNDS")
    for j in range(lp.n_cols):
        lo, hi = lp.lb[j], lp.ub[j]
        cname = _short("C", j)
        if lo == 0.0 and hi == math.inf:
            continue
        if lo == hi:
            out.append(_line("FX", BOUND_SET, cname, _num(lo)))
            continue
        if lo == -math.inf and hi == math.inf:
            out.append(_line("FR", BOUND_SET, cname))
            continue
        if lo == -math.inf:
            out.append(_line("MI", BOUND_SET, cname))
        elif lo != 0.0:
            out.append(_line("LO", BOUND_SET, cname, _num(lo)))
        if hi != math.inf:
            out.append(_line("UP", BOUND_SET, cname, _num(hi)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def write_interchange(lp: LinearProgram, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_interchange(lp))
    return path


def read_interchange(path) -> LinearProgram:
    """Parse an MPS file (fixed or free; names must not contain blanks)."""
    names = {}
    row_order, senses = [], {}
    obj_row = None
    col_order, col_index = [], {}
    entries = []
    cost = {}
    rhs = {}
    bounds = {}
    section = None
    model_name = "MODEL"
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("*"):
                parts = line.split(None, 3)
                if len(parts) == 4 and parts[1] == "MAP":
                    names[parts[2]] = parts[3]
                continue
            if not line.strip():
                continue
            if not line[0].isspace():
                head = line.split()
                section = head[0]
                if section == "NAME" and len(head) > 1:
                    model_name = head[1]
                if section == "ENDATA":
                    break
                continue
            tok = line.split()
            if section == "ROWS":
                s, r = tok
                if s == "N":
                    if obj_row is None:
                        obj_row = r
                    continue
                senses[r] = s
                row_order.append(r)
            elif section == "COLUMNS":
                if "'MARKER'" in tok:
                    raise LPError("integer markers are not supported")
                c = tok[0]
                if c not in col_index:
                    col_index[c] = len(col_order)
                    col_order.append(c)
                for r, v in zip(tok[1::2], tok[2::2]):
                    if r == obj_row:
                        cost[c] = cost.get(c, 0.0) + float(v)
                    else:
                        entries.append((r, c, float(v)))
            elif section == "RHS":
                pairs = tok[1:] if len(tok) % 2 == 1 else tok
                for r, v in zip(pairs[0::2], pairs[1::2]):
                    if r != obj_row:
                        rhs[r] = float(v)
            elif section == "RANGES":
                raise LPError("RANGES entries are not supported")
            elif section == "BOUNDS":
                kind, c = tok[0], tok[2] if len(tok) >= 3 else tok[1]
                val = float(tok[3]) if len(tok) >= 4 else None
                lo, hi = bounds.get(c, (0.0, math.inf))
                if kind == "UP":
                    hi = val
                elif kind == "LO":
                    lo = val
                elif kind == "FX":
                    lo = hi = val
                elif kind == "FR":
                    lo, hi = -math.inf, math.inf
                elif kind == "MI":
                    lo = -math.inf
                elif kind == "PL":
                    hi = math.inf
                else:
                    raise LPError(f"unsupported bound type {kind}")
                bounds[c] = (lo, hi)
    row_index = {r: i for i, r in enumerate(row_order)}
    n = len(col_order)
    rows = [row_index[r] for r, _, _ in entries]
    cols = [col_index[c] for _, c, _ in entries]
    vals = [v for _, _, v in entries]
    lb = np.array([bounds.get(c, (0.0, math.inf))[0] for c in col_order])
    ub = np.array([bounds.get(c, (0.0, math.inf))[1] for c in col_order])
    return LinearProgram.from_triplets(
        len(row_order), n, rows, cols, vals,
        c=np.array([cost.get(c, 0.0) for c in col_order]),
        senses=tuple(senses[r] for r in row_order),
        b=np.array([rhs.get(r, 0.0) for r in row_order]),
        lb=lb, ub=ub,
        row_names=tuple(names.get(r, r) for r in row_order),
        col_names=tuple(names.get(c, c) for c in col_order),
        name=model_name,
    )
