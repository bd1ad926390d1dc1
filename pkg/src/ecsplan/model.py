"""MILP assembly for radial collector-system planning.

The model is kept solver-neutral: a list of columns with bounds,
integrality and objective, and a list of sparse rows. Objective units are
million yuan (m¥); powers, resistances and voltages are per-unit.

Per candidate cable ``e = (i, j)`` with ``i < j`` the model carries

* ``x``    build decision (binary)
* ``bp``   ``i`` is the parent of ``j`` (binary), ``bm`` the reverse
* ``f``    signed flow, positive from ``i`` to ``j``
* ``fp``, ``fm``  positive and negative parts of ``f``
* ``l``    epigraph of ``f**2`` (tangent cuts)

and per node a voltage ``v`` and, for turbines, curtailment ``gc``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ecsplan.candidates import CandidateGraph
from ecsplan.farm import CostModel, InvalidArgument, PlanningConfig, require_valid

LE, GE, EQ = "L", "G", "E"


@dataclass
class Column:
    name: str
    lb: float
    ub: float
    integer: bool
    obj: float


@dataclass
class Row:
    name: str
    coeffs: dict[int, float]
    sense: str
    rhs: float


@dataclass
class MilpModel:
    columns: list[Column] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    name: str = "ECSPLAN"

    def add_column(self, name, lb=0.0, ub=np.inf, integer=False, obj=0.0) -> int:
        self.columns.append(Column(name, float(lb), float(ub), bool(integer), float(obj)))
        return len(self.columns) - 1

    def add_row(self, name, coeffs, sense, rhs) -> int:
        if sense not in (LE, GE, EQ):
            raise InvalidArgument(f"unknown row sense {sense!r}")
        clean = {int(k): float(v) for k, v in coeffs.items() if v != 0}
        self.rows.append(Row(name, clean, sense, float(rhs)))
        return len(self.rows) - 1

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def objective_vector(self) -> np.ndarray:
        return np.array([c.obj for c in self.columns])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([c.lb for c in self.columns]), np.array([c.ub for c in self.columns]))

    def integer_mask(self) -> np.ndarray:
        return np.array([c.integer for c in self.columns], dtype=bool)

    def matrix(self) -> sp.csr_matrix:
        data, ri, ci = [], [], []
        for r, row in enumerate(self.rows):
            for k, v in row.coeffs.items():
                ri.append(r)
                ci.append(k)
                data.append(v)
        return sp.csr_matrix((data, (ri, ci)), shape=(self.n_rows, self.n_cols))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.n_rows, -np.inf)
        hi = np.full(self.n_rows, np.inf)
        for r, row in enumerate(self.rows):
            if row.sense in (GE, EQ):
                lo[r] = row.rhs
            if row.sense in (LE, EQ):
                hi[r] = row.rhs
        return lo, hi

    def validate(self) -> list[str]:
        problems = []
        for row in self.rows:
            for k in row.coeffs:
                if not 0 <= k < self.n_cols:
                    problems.append(f"row {row.name}: unknown column {k}")
        for col in self.columns:
            if col.integer and not (col.lb >= 0 and col.ub <= 1):
                problems.append(f"column {col.name}: binary with bounds [{col.lb}, {col.ub}]")
            if col.lb > col.ub:
                problems.append(f"column {col.name}: empty bounds [{col.lb}, {col.ub}]")
        return problems

    def violations(self, values, row_tol: float = 1e-6, bound_tol: float = 1e-7) -> list[str]:
        """Rows and bounds violated by a full column vector."""
        x = np.asarray(values, dtype=float)
        out = []
        lb, ub = self.bounds()
        for k in np.flatnonzero((x < lb - bound_tol) | (x > ub + bound_tol)):
            out.append(f"bound {self.columns[k].name}: {x[k]} not in [{lb[k]}, {ub[k]}]")
        activity = self.matrix() @ x
        lo, hi = self.row_bounds()
        for r in np.flatnonzero((activity < lo - row_tol) | (activity > hi + row_tol)):
            out.append(f"row {self.rows[r].name}: activity {activity[r]} not in [{lo[r]}, {hi[r]}]")
        return out

    def objective_value(self, values) -> float:
        return float(self.objective_vector() @ np.asarray(values, dtype=float))

    def relaxed(self) -> "MilpModel":
        cols = [Column(c.name, c.lb, c.ub, False, c.obj) for c in self.columns]
        return MilpModel(cols, list(self.rows), self.name)


@dataclass(frozen=True)
class VarMap:
    x: tuple[int, ...]
    bp: tuple[int, ...]
    bm: tuple[int, ...]
    f: tuple[int, ...]
    fp: tuple[int, ...]
    fm: tuple[int, ...]
    loss: tuple[int, ...]
    v: dict[int, int]
    gc: dict[int, int]
    loss_weight: float  # m¥ per p.u. of r*f^2
    v_ref: float

    @property
    def binaries(self) -> tuple[int, ...]:
        """Binary columns with every x before any orientation column."""
        return self.x + tuple(c for pair in zip(self.bp, self.bm) for c in pair)

    def all_columns(self) -> list[int]:
        cols = list(self.x + self.bp + self.bm + self.f + self.fp + self.fm + self.loss)
        cols += list(self.v.values()) + list(self.gc.values())
        return cols


def incidence_matrix(graph: CandidateGraph) -> sp.csc_matrix:
    """Node x edge matrix: +1 at the smaller endpoint, -1 at the larger one."""
    n, m = len(graph.instance.nodes), len(graph.edges)
    rows, cols, vals = [], [], []
    for e in graph.edges:
        rows += [e.i, e.j]
        cols += [e.id, e.id]
        vals += [1.0, -1.0]
    return sp.csc_matrix((vals, (rows, cols)), shape=(n, m))


def pwl_loss_cuts(capacity: float, segments: int) -> list[tuple[float, float]]:
    """Tangent lines (slope, intercept) of s**2 at s_k = k * capacity / segments."""
    if capacity <= 0 or segments < 1:
        raise InvalidArgument("capacity must be positive and segments >= 1")
    cuts = []
    for k in range(segments + 1):
        s = k * capacity / segments
        cuts.append((2.0 * s, -s * s))
    return cuts


def pwl_envelope(s, cuts) -> float:
    return max(a * s + b for a, b in cuts)


def curtail_weight(cost_model: CostModel) -> float:
    return cost_model.curtail_penalty / 1e6


def build_milp(
    graph: CandidateGraph, config: PlanningConfig, cost_model: CostModel
) -> tuple[MilpModel, VarMap]:
    instance = graph.instance
    require_valid(config.validate())
    require_valid(cost_model.validate(instance.base))

    loss_weight = cost_model.loss_value_per_pu(instance.base) / 1e6
    K = config.pwl_segments
    span = config.v_hi - config.v_lo
    model = MilpModel()

    x, bp, bm, f, fp, fm, loss = ([] for _ in range(7))
    sub_ids = {n.id for n in instance.substations}
    for e in graph.edges:
        x.append(model.add_column(f"x{e.id}", 0, 1, True, e.cost))
        # a substation is never a child
        bp.append(model.add_column(f"bp{e.id}", 0, 0 if e.j in sub_ids else 1, True))
        bm.append(model.add_column(f"bm{e.id}", 0, 0 if e.i in sub_ids else 1, True))
        f.append(model.add_column(f"f{e.id}", -e.capacity, e.capacity))
        fp.append(model.add_column(f"fp{e.id}", 0, e.capacity))
        fm.append(model.add_column(f"fm{e.id}", 0, e.capacity))
        loss.append(model.add_column(f"l{e.id}", 0, np.inf, False, loss_weight * e.resistance))
    v = {}
    gc = {}
    for n in instance.nodes:
        if n.is_substation:
            v[n.id] = model.add_column(f"v{n.id}", config.v_ref, config.v_ref)
        else:
            v[n.id] = model.add_column(f"v{n.id}", config.v_lo, config.v_hi)
    penalty = curtail_weight(cost_model)
    for n in instance.turbines:
        gc[n.id] = model.add_column(f"gc{n.id}", 0, instance.gen_pu(n.id), False, penalty)

    for e in graph.edges:
        k = e.id
        model.add_row(f"fs{k}", {f[k]: 1, fp[k]: -1, fm[k]: 1}, EQ, 0)
        model.add_row(f"cp{k}", {fp[k]: 1, x[k]: -e.capacity}, LE, 0)
        model.add_row(f"cm{k}", {fm[k]: 1, x[k]: -e.capacity}, LE, 0)
        for s_idx, (slope, icpt) in enumerate(pwl_loss_cuts(e.capacity, K)):
            if s_idx == 0:
                continue  # l >= 0 is a bound
            model.add_row(f"w{k}_{s_idx}", {loss[k]: 1, fp[k]: -slope, fm[k]: -slope}, GE, icpt)
        big_m = e.capacity * e.resistance + span
        drop = {f[k]: e.resistance, v[e.i]: -1, v[e.j]: 1}
        model.add_row(f"kh{k}", {**drop, x[k]: big_m}, LE, big_m)
        model.add_row(f"kl{k}", {**drop, x[k]: -big_m}, GE, -big_m)
        model.add_row(f"or{k}", {bp[k]: 1, bm[k]: 1, x[k]: -1}, EQ, 0)

    incident: dict[int, list] = defaultdict(list)
    for e in graph.edges:
        incident[e.i].append(e)
        incident[e.j].append(e)
    for n in instance.turbines:
        kcl = {f[e.id]: (1.0 if e.i == n.id else -1.0) for e in incident[n.id]}
        kcl[gc[n.id]] = 1.0
        model.add_row(f"kc{n.id}", kcl, EQ, instance.gen_pu(n.id))
        parent = {(bp[e.id] if e.j == n.id else bm[e.id]): 1.0 for e in incident[n.id]}
        model.add_row(f"pa{n.id}", parent, EQ, 1)

    model.add_row("radial", {c: 1 for c in x}, EQ, len(instance.nodes) - len(sub_ids))

    if config.forbid_crossings:
        for idx, (a, b) in enumerate(graph.crossings):
            model.add_row(f"X{idx}", {x[a]: 1, x[b]: 1}, LE, 1)
    by_pair: dict[tuple[int, int], list[int]] = defaultdict(list)
    for e in graph.edges:
        by_pair[e.endpoints].append(e.id)
    groups = [ids for _, ids in sorted(by_pair.items()) if len(ids) > 1]
    for idx, ids in enumerate(groups):
        model.add_row(f"P{idx}", {x[k]: 1 for k in ids}, LE, 1)

    varmap = VarMap(
        x=tuple(x), bp=tuple(bp), bm=tuple(bm), f=tuple(f), fp=tuple(fp), fm=tuple(fm),
        loss=tuple(loss), v=v, gc=gc, loss_weight=loss_weight, v_ref=config.v_ref,
    )
    return model, varmap


def expected_size(graph: CandidateGraph, config: PlanningConfig) -> tuple[int, int]:
    """Closed-form (columns, rows) of :func:`build_milp`."""
    n_edges = len(graph.edges)
    n_nodes = len(graph.instance.nodes)
    n_wt = len(graph.instance.turbines)
    cols = 7 * n_edges + n_nodes + n_wt
    pairs: dict[tuple[int, int], int] = defaultdict(int)
    for e in graph.edges:
        pairs[e.endpoints] += 1
    rows = (6 + config.pwl_segments) * n_edges + 2 * n_wt + 1
    rows += sum(1 for c in pairs.values() if c > 1)
    if config.forbid_crossings:
        rows += len(graph.crossings)
    return cols, rows


def plan_to_columns(plan, model: MilpModel, varmap: VarMap, graph: CandidateGraph) -> np.ndarray:
    """Column vector induced by a radial plan (flows, voltages from the plan)."""
    values = np.zeros(model.n_cols)
    chosen = {e.id for e in plan.edges}
    for e in graph.edges:
        if e.id not in chosen:
            continue
        values[varmap.x[e.id]] = 1.0
        child = plan.child_of(e)
        if child == e.j:
            values[varmap.bp[e.id]] = 1.0
        else:
            values[varmap.bm[e.id]] = 1.0
        fl = plan.signed_flow(e)
        values[varmap.f[e.id]] = fl
        values[varmap.fp[e.id]] = max(fl, 0.0)
        values[varmap.fm[e.id]] = max(-fl, 0.0)
    # loss epigraph at its tightest value
    loss_rows: dict[int, list[Row]] = defaultdict(list)
    loss_cols = {c: k for k, c in enumerate(varmap.loss)}
    for row in model.rows:
        if row.sense == GE and row.name.startswith("w"):
            for col in row.coeffs:
                if col in loss_cols:
                    loss_rows[col].append(row)
    for col, rows in loss_rows.items():
        best = 0.0
        for row in rows:
            rest = sum(coef * values[c] for c, coef in row.coeffs.items() if c != col)
            best = max(best, row.rhs - rest)
        values[col] = best
    for node, col in varmap.v.items():
        values[col] = plan.voltages.get(node, varmap.v_ref)
    for node, col in varmap.gc.items():
        values[col] = plan.curtailment.get(node, 0.0)
    return values
