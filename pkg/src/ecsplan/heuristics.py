"""Primal heuristics that feed incumbents to branch-and-bound.

All of them produce substation-rooted spanning forests over the
candidate graph. ``rounding_heuristic`` is the plain LP-guided Kruskal;
``greedy_tree`` grows capacity-aware trees by marginal lifetime cost and
``local_search`` improves any forest by single edge exchanges, using a
penalty for overloads and crossings so it can also repair infeasible
starts.
"""

from __future__ import annotations

import time
from collections import deque

import numpy as np

from ecsplan.baselines import DisjointSet
from ecsplan.candidates import CandidateCable, CandidateGraph
from ecsplan.evaluate import Plan, StructureError, build_plan, check_feasibility
from ecsplan.farm import CostModel, PlanningConfig

OVERLOAD_WEIGHT = 1e5  # m¥ per p.u. over capacity
CROSSING_WEIGHT = 1e4  # m¥ per chosen crossing pair


def rounding_heuristic(
    lp_x,
    graph: CandidateGraph,
    config: PlanningConfig,
    seed: int | None = None,
) -> Plan | None:
    """Kruskal over candidates by descending LP build value.

    Ties fall back to cheaper cost, then to a seeded shuffle (or edge id).
    An edge is taken when it merges two components that do not both hold
    a substation. Returns None unless the result is a feasible plan.
    """
    instance = graph.instance
    lp_x = np.asarray(lp_x, dtype=float)
    tiebreak = np.arange(len(graph.edges))
    if seed is not None:
        tiebreak = np.random.default_rng(seed).permutation(len(graph.edges))
    order = sorted(graph.edges, key=lambda e: (-round(lp_x[e.id], 9), e.cost, tiebreak[e.id]))
    subs = {n.id for n in instance.substations}
    dsu = DisjointSet(n.id for n in instance.nodes)
    rooted = {n.id: n.id in subs for n in instance.nodes}
    target = len(instance.nodes) - len(subs)
    chosen: list[CandidateCable] = []
    crossing = _crossing_lookup(graph) if config.forbid_crossings else {}
    taken: set[int] = set()
    for e in order:
        if len(chosen) == target:
            break
        ra, rb = dsu.find(e.i), dsu.find(e.j)
        if ra == rb or (rooted[ra] and rooted[rb]):
            continue
        if crossing and crossing.get(e.id, set()) & taken:
            continue
        dsu.union(ra, rb)
        rooted[dsu.find(ra)] = rooted[ra] or rooted[rb]
        chosen.append(e)
        taken.add(e.id)
    try:
        plan = build_plan(instance, chosen, config.v_ref)
    except StructureError:
        return None
    if check_feasibility(plan, graph, config):
        return None
    return plan


def _crossing_lookup(graph: CandidateGraph) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {}
    for a, b in graph.crossings:
        out.setdefault(a, set()).add(b)
        out.setdefault(b, set()).add(a)
    return out


class TreeScorer:
    """Fast penalised lifetime cost of a forest given as a set of edge ids."""

    def __init__(self, graph: CandidateGraph, config: PlanningConfig, cost_model: CostModel):
        inst = graph.instance
        self.graph = graph
        self.config = config
        self.edges = graph.edges
        self.n = len(inst.nodes)
        self.subs = [n.id for n in inst.substations]
        self.gen = [inst.gen_pu(k) for k in range(self.n)]
        self.is_sub = [inst.nodes[k].is_substation for k in range(self.n)]
        self.loss_weight = cost_model.loss_value_per_pu(inst.base) / 1e6
        self.curtail_weight = cost_model.curtail_penalty / 1e6
        self.crossing = _crossing_lookup(graph) if config.forbid_crossings else {}

    def orient(self, edge_ids):
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for k in edge_ids:
            e = self.edges[k]
            adj[e.i].append(k)
            adj[e.j].append(k)
        parent_edge = [-1] * self.n
        seen = [False] * self.n
        order = []
        for s in self.subs:
            seen[s] = True
            order.append(s)
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for k in adj[u]:
                    if k == parent_edge[u]:
                        continue
                    w = self.edges[k].other(u)
                    if seen[w]:
                        return None
                    seen[w] = True
                    parent_edge[w] = k
                    order.append(w)
                    queue.append(w)
        return parent_edge, order, seen

    def score(self, edge_ids) -> float:
        oriented = self.orient(edge_ids)
        if oriented is None:
            return float("inf")
        parent_edge, order, seen = oriented
        flow = [self.gen[k] if seen[k] else 0.0 for k in range(self.n)]
        total = 0.0
        for k in range(self.n):
            if not seen[k]:
                total += self.curtail_weight * self.gen[k]
        for node in reversed(order):
            k = parent_edge[node]
            if k < 0:
                continue
            e = self.edges[k]
            f = flow[node]
            flow[e.other(node)] += f
            total += e.cost + self.loss_weight * e.resistance * f * f
            if f > e.capacity:
                total += OVERLOAD_WEIGHT * (f - e.capacity)
        span = self.config.v_hi - self.config.v_ref
        volt = [0.0] * self.n
        for node in order:
            k = parent_edge[node]
            if k < 0:
                continue
            e = self.edges[k]
            volt[node] = volt[e.other(node)] + flow[node] * e.resistance
            if volt[node] > span:
                total += OVERLOAD_WEIGHT * (volt[node] - span)
        if self.crossing:
            chosen = set(edge_ids)
            pairs = sum(len(self.crossing.get(k, set()) & chosen) for k in chosen) // 2
            total += CROSSING_WEIGHT * pairs
        return total


def greedy_tree(
    graph: CandidateGraph,
    config: PlanningConfig,
    cost_model: CostModel,
    bias=None,
) -> list[int]:
    """Prim-style growth from all substations by marginal lifetime cost.

    Attaching turbine ``w`` below ``u`` costs the cable plus the extra loss
    along the whole path to the root; moves that would overload a cable on
    that path are skipped while any alternative exists. ``bias`` (0..1 per
    edge, e.g. LP build values) discounts cable cost.
    """
    inst = graph.instance
    scorer = TreeScorer(graph, config, cost_model)
    n = scorer.n
    in_tree = [scorer.is_sub[k] for k in range(n)]
    parent_edge = [-1] * n
    load = [0.0] * n  # flow on the cable above each node
    bias = np.zeros(len(graph.edges)) if bias is None else np.asarray(bias, dtype=float)
    crossing = scorer.crossing
    chosen: list[int] = []
    remaining = sum(1 for k in range(n) if not in_tree[k])

    def path(u):
        while parent_edge[u] >= 0:
            e = graph.edges[parent_edge[u]]
            yield u, e
            u = e.other(u)

    while remaining:
        best = None
        fallback = None
        for u in range(n):
            if not in_tree[u]:
                continue
            for k in graph.adjacency[u]:
                e = graph.edges[k]
                w = e.other(u)
                if in_tree[w]:
                    continue
                if crossing and crossing.get(k, set()) & set(chosen):
                    continue
                g = scorer.gen[w]
                extra = scorer.loss_weight * e.resistance * g * g
                ok = g <= e.capacity
                for node, pe in path(u):
                    f = load[node]
                    extra += scorer.loss_weight * pe.resistance * (2 * f * g + g * g)
                    if f + g > pe.capacity + 1e-12:
                        ok = False
                key = (e.cost * (1.0 - 0.5 * bias[k]) + extra, k)
                if ok and (best is None or key < best[0]):
                    best = (key, u, w, k)
                if fallback is None or key < fallback[0]:
                    fallback = (key, u, w, k)
        pick = best or fallback
        if pick is None:
            break  # disconnected candidate graph
        _, u, w, k = pick
        in_tree[w] = True
        parent_edge[w] = k
        chosen.append(k)
        remaining -= 1
        g = scorer.gen[w]
        load[w] = g
        for node, _ in path(u):
            load[node] += g
    del inst
    return chosen


def local_search(
    edge_ids,
    graph: CandidateGraph,
    config: PlanningConfig,
    cost_model: CostModel,
    time_budget: float = 30.0,
    max_rounds: int = 200,
) -> list[int]:
    """First-improvement edge exchange on a spanning forest.

    Each move drops the cable above some node and reconnects that
    node's subtree through another candidate leaving the subtree.
    """
    scorer = TreeScorer(graph, config, cost_model)
    current = sorted(edge_ids)
    best = scorer.score(current)
    deadline = time.monotonic() + time_budget
    for _ in range(max_rounds):
        oriented = scorer.orient(current)
        if oriented is None:
            break
        parent_edge, order, _ = oriented
        children: dict[int, list[int]] = {}
        for node in order:
            k = parent_edge[node]
            if k >= 0:
                children.setdefault(graph.edges[k].other(node), []).append(node)
        improved = False
        for node in order:
            drop = parent_edge[node]
            if drop < 0:
                continue
            subtree = {node}
            stack = [node]
            while stack:
                u = stack.pop()
                for c in children.get(u, ()):
                    subtree.add(c)
                    stack.append(c)
            base = [k for k in current if k != drop]
            for u in sorted(subtree):
                for k in graph.adjacency[u]:
                    if k == drop:
                        continue
                    e = graph.edges[k]
                    if e.other(u) in subtree:
                        continue
                    trial = base + [k]
                    s = scorer.score(trial)
                    if s < best - 1e-9:
                        best, current, improved = s, sorted(trial), True
                        break
                if improved:
                    break
            if improved or time.monotonic() > deadline:
                break
        if not improved or time.monotonic() > deadline:
            break
    return current


def improve_to_plan(
    edge_ids,
    graph: CandidateGraph,
    config: PlanningConfig,
    cost_model: CostModel,
    time_budget: float = 30.0,
) -> Plan | None:
    """Local search from ``edge_ids``; the feasible plan or None."""
    ids = local_search(edge_ids, graph, config, cost_model, time_budget)
    try:
        plan = build_plan(graph.instance, [graph.edges[k] for k in ids], config.v_ref)
    except StructureError:
        return None
    if check_feasibility(plan, graph, config):
        return None
    return plan
