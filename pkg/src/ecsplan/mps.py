"""MPS export and import for :class:`~ecsplan.model.MilpModel`.

Sections are laid out at the fixed-format field positions. Numbers are
written with ``repr`` so a round trip is lossless; the reader therefore
splits on whitespace rather than on column positions, which also accepts
free-format files that use the same section keywords.
"""

from __future__ import annotations

import math

from ecsplan.model import EQ, GE, LE, MilpModel

OBJ = "OBJ"
_SENSE = {LE: "L", GE: "G", EQ: "E"}


def _num(v: float) -> str:
    if v == 0:
        return "0"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _line(code: str, name: str, pairs=()) -> str:
    out = f" {code:<2} {name:<8}"
    for key, val in pairs:
        out += f"  {key:<8}  {val:>12}"
    return out.rstrip()


def _is_binary(col) -> bool:
    return col.lb == 0 and col.ub == 1


def export_mps(model: MilpModel) -> str:
    for name in [c.name for c in model.columns] + [r.name for r in model.rows]:
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"MPS names must be non-empty without whitespace: {name!r}")
    lines = [f"NAME          {model.name}", "ROWS", _line("N", OBJ)]
    for row in model.rows:
        lines.append(_line(_SENSE[row.sense], row.name))

    by_col: list[list[tuple[str, float]]] = [[] for _ in model.columns]
    for row in model.rows:
        for k, v in sorted(row.coeffs.items()):
            by_col[k].append((row.name, v))
    lines.append("COLUMNS")
    marker = 0
    for k, col in enumerate(model.columns):
        # integer columns other than plain binaries go inside INTORG markers
        wrap = col.integer and not _is_binary(col)
        if wrap:
            lines.append(_line("", f"M{marker}", [("'MARKER'", "'INTORG'")]))
        entries = ([(OBJ, col.obj)] if col.obj != 0 or not by_col[k] else []) + by_col[k]
        for start in range(0, len(entries), 2):
            chunk = entries[start : start + 2]
            lines.append(_line("", col.name, [(r, _num(v)) for r, v in chunk]))
        if wrap:
            lines.append(_line("", f"M{marker}E", [("'MARKER'", "'INTEND'")]))
            marker += 1

    lines.append("RHS")
    for row in model.rows:
        if row.rhs != 0:
            lines.append(_line("", "RHS", [(row.name, _num(row.rhs))]))

    lines.append("BOUNDS")
    for col in model.columns:
        lb, ub = col.lb, col.ub
        if col.integer and _is_binary(col):
            lines.append(_line("BV", "BND", [(col.name, "")]))
            continue
        if lb == ub:
            lines.append(_line("FX", "BND", [(col.name, _num(lb))]))
            continue
        if math.isinf(lb) and math.isinf(ub):
            lines.append(_line("FR", "BND", [(col.name, "")]))
            continue
        if math.isinf(lb):
            lines.append(_line("MI", "BND", [(col.name, "")]))
        elif lb != 0:
            lines.append(_line("LO", "BND", [(col.name, _num(lb))]))
        if not math.isinf(ub):
            lines.append(_line("UP", "BND", [(col.name, _num(ub))]))
        elif col.integer:
            lines.append(_line("PL", "BND", [(col.name, "")]))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def parse_mps(text: str) -> MilpModel:
    model = MilpModel()
    section = None
    row_index: dict[str, int] = {}
    col_index: dict[str, int] = {}
    obj_name = None
    senses = {"L": LE, "G": GE, "E": EQ}
    integer_block = False
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0].upper()
            if section == "NAME":
                model.name = head[1] if len(head) > 1 else ""
            if section == "ENDATA":
                break
            continue
        tok = raw.split()
        if section == "ROWS":
            code, name = tok[0].upper(), tok[1]
            if code == "N":
                if obj_name is None:
                    obj_name = name
                continue
            row_index[name] = model.add_row(name, {}, senses[code], 0.0)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                integer_block = tok[2] == "'INTORG'"
                continue
            name = tok[0]
            if name not in col_index:
                col_index[name] = model.add_column(name, 0.0, math.inf, integer_block, 0.0)
                if integer_block:
                    model.columns[col_index[name]].ub = 1.0
            k = col_index[name]
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj_name:
                    model.columns[k].obj = float(val)
                else:
                    model.rows[row_index[rname]].coeffs[k] = float(val)
        elif section == "RHS":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname != obj_name:
                    model.rows[row_index[rname]].rhs = float(val)
        elif section == "BOUNDS":
            code = tok[0].upper()
            col = model.columns[col_index[tok[2]]]
            val = float(tok[3]) if len(tok) > 3 else None
            if code == "UP":
                col.ub = val
            elif code == "LO":
                col.lb = val
            elif code == "FX":
                col.lb = col.ub = val
            elif code == "FR":
                col.lb, col.ub = -math.inf, math.inf
            elif code == "MI":
                col.lb = -math.inf
            elif code == "PL":
                col.ub = math.inf
            elif code == "BV":
                col.lb, col.ub, col.integer = 0.0, 1.0, True
            else:
                raise ValueError(f"unsupported bound type {code}")
        elif section in ("RANGES", "OBJSENSE"):
            raise ValueError(f"section {section} is not supported")
    return model
