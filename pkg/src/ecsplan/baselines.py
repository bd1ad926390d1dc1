"""Comparator layouts and the exhaustive oracle.

* ``baseline_string_layout``: the conventional design, one string per
  turbine row with a home-run cable to a fixed substation.
* ``mst_baseline``: minimum-cost spanning forest ignoring capacities.
* ``brute_force_optimal``: enumerates every substation-rooted spanning
  forest of a small candidate graph and evaluates it exactly.
"""

from __future__ import annotations

import math

from ecsplan.candidates import CandidateGraph, graph_from_pairs
from ecsplan.evaluate import (
    Plan,
    StructureError,
    build_plan,
    check_feasibility,
    cost_breakdown,
)
from ecsplan.farm import (
    CostModel,
    InvalidArgument,
    Node,
    NodeKind,
    PlanningConfig,
    WindFarmInstance,
)

DEFAULT_CASE1_SUBSTATION = (11.05, 0.0)


class OracleRefused(RuntimeError):
    """The instance is too large for exhaustive enumeration."""


class DisjointSet:
    def __init__(self, items=()):
        items = list(items)
        self.parent = {i: i for i in items}
        self.size = {i: 1 for i in items}

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def grid_rows(instance: WindFarmInstance, tol: float = 1e-9) -> list[list[Node]]:
    """Turbines grouped by row (south to north), each row sorted west to east."""
    rows: dict[float, list[Node]] = {}
    for t in instance.turbines:
        key = next((y for y in rows if abs(y - t.y) <= tol), t.y)
        rows.setdefault(key, []).append(t)
    ordered = [sorted(rows[y], key=lambda n: n.x) for y in sorted(rows)]
    widths = {len(r) for r in ordered}
    if len(widths) != 1:
        raise InvalidArgument("not a grid: rows have different turbine counts")
    columns = [n.x for n in ordered[0]]
    for r in ordered[1:]:
        if any(abs(n.x - x) > tol for n, x in zip(r, columns)):
            raise InvalidArgument("not a grid: columns are not aligned")
    return ordered


def baseline_string_layout(
    instance: WindFarmInstance,
    substation_position: tuple[float, float] = DEFAULT_CASE1_SUBSTATION,
    config: PlanningConfig | None = None,
) -> tuple[Plan, CandidateGraph]:
    """One west-to-east string per row plus a home-run to the substation.

    ``instance`` holds turbines only; the substation is appended at
    ``substation_position``. Returns the plan and a graph whose edges are
    exactly the plan's cables.
    """
    config = config or PlanningConfig()
    if instance.substations:
        raise InvalidArgument("string baseline expects a turbine-only instance")
    rows = grid_rows(instance)
    sub = Node(len(instance.nodes), NodeKind.SUBSTATION, *map(float, substation_position))
    sited = instance.with_nodes([sub])
    pairs = []
    for row in rows:
        for a, b in zip(row, row[1:]):
            pairs.append((a.id, b.id))
        pairs.append((row[-1].id, sub.id))
    graph = graph_from_pairs(sited, pairs, config)
    return build_plan(sited, graph.edges, config.v_ref), graph


def mst_baseline(graph: CandidateGraph, config: PlanningConfig | None = None) -> Plan:
    """Kruskal on cable cost with all substations merged into one root."""
    config = config or PlanningConfig()
    instance = graph.instance
    dsu = DisjointSet(n.id for n in instance.nodes)
    subs = [n.id for n in instance.substations]
    for s in subs[1:]:
        dsu.union(subs[0], s)
    chosen = []
    for e in sorted(graph.edges, key=lambda e: (e.cost, e.id)):
        if dsu.union(e.i, e.j):
            chosen.append(e)
    roots = {dsu.find(n.id) for n in instance.nodes}
    if len(roots) > 1:
        raise StructureError("candidate graph is disconnected; no spanning forest exists")
    return build_plan(instance, chosen, config.v_ref)


def _forests(graph: CandidateGraph):
    """Yield every edge subset that is a spanning forest with one substation per tree."""
    instance = graph.instance
    n_nodes = len(instance.nodes)
    subs = {n.id for n in instance.substations}
    target = n_nodes - len(subs)
    edges = sorted(graph.edges, key=lambda e: e.id)
    comp = list(range(n_nodes))
    has_sub = [i in subs for i in range(n_nodes)]

    def find(a):
        while comp[a] != a:
            a = comp[a]
        return a

    chosen = []

    def rec(start):
        if len(chosen) == target:
            yield tuple(chosen)
            return
        for k in range(start, len(edges)):
            if len(edges) - k < target - len(chosen):
                return
            e = edges[k]
            ra, rb = find(e.i), find(e.j)
            if ra == rb or (has_sub[ra] and has_sub[rb]):
                continue
            comp[rb] = ra
            old = has_sub[ra]
            has_sub[ra] = old or has_sub[rb]
            chosen.append(e)
            yield from rec(k + 1)
            chosen.pop()
            has_sub[ra] = old
            comp[rb] = rb

    yield from rec(0)


def brute_force_optimal(
    graph: CandidateGraph,
    cost_model: CostModel,
    config: PlanningConfig,
    node_limit: int = 9,
) -> tuple[Plan | None, float]:
    """Cheapest feasible radial plan by exhaustive enumeration.

    Objective is the exact lifetime total in m¥ (true quadratic losses).
    Ties go to the lexicographically smallest edge-id tuple. Returns
    ``(None, inf)`` when no enumerated forest is feasible.
    """
    instance = graph.instance
    if len(instance.nodes) > node_limit:
        raise OracleRefused(f"{len(instance.nodes)} nodes exceeds the oracle limit of {node_limit}")
    best_key = (math.inf, ())
    best_plan = None
    for forest in _forests(graph):
        plan = build_plan(instance, forest, config.v_ref)
        if check_feasibility(plan, graph, config):
            continue
        total = cost_breakdown(plan, instance, cost_model).total
        key = (total, tuple(e.id for e in forest))
        if key < best_key:
            best_key, best_plan = key, plan
    return best_plan, best_key[0]


def count_forests(graph: CandidateGraph) -> int:
    return sum(1 for _ in _forests(graph))

