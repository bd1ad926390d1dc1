"""Exact evaluation of radial cable plans: tree power flow, costs, feasibility."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from ecsplan.candidates import CandidateCable, CandidateGraph
from ecsplan.farm import CostModel, PerUnitBase, PlanningConfig, WindFarmInstance, from_per_unit

FLOW_TOL = 1e-9
VOLTAGE_TOL = 1e-9


class StructureError(ValueError):
    """A plan that is not a forest rooted at substations."""


@dataclass(frozen=True)
class Plan:
    """A chosen set of cables with its exact operating point.

    ``flows`` is keyed by cable id and measured child -> parent, so it is
    non-negative in a generation-only farm. ``parent`` maps each turbine to
    its upstream node; ``parent_edge`` to the cable used.
    """

    edges: tuple[CandidateCable, ...]
    parent: dict[int, int] = field(default_factory=dict)
    parent_edge: dict[int, int] = field(default_factory=dict)
    flows: dict[int, float] = field(default_factory=dict)
    voltages: dict[int, float] = field(default_factory=dict)
    losses: dict[int, float] = field(default_factory=dict)
    curtailment: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def edge_ids(self) -> list[int]:
        return sorted(e.id for e in self.edges)

    @property
    def cable_length(self) -> float:
        return sum(e.length for e in self.edges)

    @property
    def investment(self) -> float:
        return sum(e.cost for e in self.edges)

    def child_of(self, edge: CandidateCable) -> int:
        """The downstream endpoint of a chosen cable."""
        return edge.i if self.parent_edge.get(edge.i) == edge.id else edge.j

    def signed_flow(self, edge: CandidateCable) -> float:
        """Flow in incidence orientation: positive from the smaller to the larger id."""
        f = self.flows[edge.id]
        return f if self.child_of(edge) == edge.i else -f

    def to_dict(self) -> dict[str, Any]:
        return {
            "edges": self.edge_ids,
            "cables": [e.to_dict() for e in sorted(self.edges, key=lambda e: e.id)],
            "parent": {str(k): v for k, v in sorted(self.parent.items())},
            "parent_edge": {str(k): v for k, v in sorted(self.parent_edge.items())},
            "flows": {str(k): v for k, v in sorted(self.flows.items())},
            "voltages": {str(k): v for k, v in sorted(self.voltages.items())},
            "losses": {str(k): v for k, v in sorted(self.losses.items())},
            "curtailment": {str(k): v for k, v in sorted(self.curtailment.items())},
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any], graph: CandidateGraph | None = None) -> "Plan":
        if graph is not None:
            edges = tuple(graph.edge(int(k)) for k in doc["edges"])
        else:
            edges = tuple(CandidateCable.from_dict(c) for c in doc["cables"])

        def ints(d):
            return {int(k): int(v) for k, v in (d or {}).items()}

        def floats(d):
            return {int(k): float(v) for k, v in (d or {}).items()}

        return cls(
            edges=edges,
            parent=ints(doc.get("parent")),
            parent_edge=ints(doc.get("parent_edge")),
            flows=floats(doc.get("flows")),
            voltages=floats(doc.get("voltages")),
            losses=floats(doc.get("losses")),
            curtailment=floats(doc.get("curtailment")),
        )


@dataclass(frozen=True)
class PowerFlow:
    parent: dict[int, int]
    parent_edge: dict[int, int]
    flows: dict[int, float]
    voltages: dict[int, float]
    losses: dict[int, float]
    curtailment: dict[int, float]

    @property
    def total_loss(self) -> float:
        return sum(self.losses.values())


def orient_forest(
    instance: WindFarmInstance, edges: Sequence[CandidateCable], allow_stranded: bool = False
) -> tuple[dict[int, int], dict[int, int], list[int]]:
    """Breadth-first orientation from every substation.

    Returns (parent, parent_edge, visit order). Raises StructureError on a
    cycle, on two substations joined by a path, or on turbines that cannot
    reach a substation (unless ``allow_stranded``).
    """
    adj: dict[int, list[CandidateCable]] = {n.id: [] for n in instance.nodes}
    for e in edges:
        if e.i not in adj or e.j not in adj:
            raise StructureError(f"cable {e.id} references unknown node")
        adj[e.i].append(e)
        adj[e.j].append(e)

    parent: dict[int, int] = {}
    parent_edge: dict[int, int] = {}
    root_of: dict[int, int] = {}
    order: list[int] = []
    used: set[int] = set()
    for sub in instance.substations:
        root_of[sub.id] = sub.id
        order.append(sub.id)
        queue = deque([sub.id])
        while queue:
            u = queue.popleft()
            for e in adj[u]:
                if e.id in used:
                    continue
                used.add(e.id)
                w = e.other(u)
                if w in root_of:
                    if root_of[w] == sub.id:
                        raise StructureError(f"cycle through cable {e.id} in the tree of substation {sub.id}")
                    raise StructureError(
                        f"substations {root_of[w]} and {sub.id} are joined (cable {e.id})"
                    )
                root_of[w] = sub.id
                parent[w] = u
                parent_edge[w] = e.id
                order.append(w)
                queue.append(w)

    stranded = [n.id for n in instance.nodes if n.id not in root_of]
    if stranded:
        if not allow_stranded:
            raise StructureError(f"node(s) {stranded} not connected to any substation")
        # stranded components must still be acyclic
        stranded_set = set(stranded)
        sub_edges = [e for e in edges if e.i in stranded_set]
        comp_nodes = _components(stranded, sub_edges)
        for comp in comp_nodes:
            n_edges = sum(1 for e in sub_edges if e.i in comp)
            if n_edges >= len(comp):
                raise StructureError(f"cycle among stranded nodes {sorted(comp)}")
    return parent, parent_edge, order


def _components(nodes: Iterable[int], edges: Iterable[CandidateCable]) -> list[set[int]]:
    adj: dict[int, list[int]] = {n: [] for n in nodes}
    for e in edges:
        adj[e.i].append(e.j)
        adj[e.j].append(e.i)
    seen: set[int] = set()
    comps = []
    for n in adj:
        if n in seen:
            continue
        comp = {n}
        stack = [n]
        seen.add(n)
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    comp.add(w)
                    stack.append(w)
        comps.append(comp)
    return comps


def tree_power_flow(
    instance: WindFarmInstance,
    edges: Sequence[CandidateCable],
    v_ref: float = 1.0,
    allow_stranded: bool = False,
) -> PowerFlow:
    """Exact flows, voltages and losses on a substation-rooted forest.

    Flows accumulate generation from the leaves towards the root; voltage
    rises away from the substation by ``flow * r`` per cable; losses are
    ``r * flow**2``. Turbines of a stranded component are fully curtailed.
    """
    parent, parent_edge, order = orient_forest(instance, edges, allow_stranded)
    by_id = {e.id: e for e in edges}

    injection = {n.id: instance.gen_pu(n.id) for n in instance.nodes}
    curtailment = {n.id: 0.0 for n in instance.turbines}
    for n in instance.nodes:
        if n.id not in parent and not n.is_substation:
            curtailment[n.id] = injection[n.id]
            injection[n.id] = 0.0

    subtree = dict(injection)
    for node in reversed(order):
        if node in parent:
            subtree[parent[node]] += subtree[node]

    flows: dict[int, float] = {}
    losses: dict[int, float] = {}
    voltages: dict[int, float] = {}
    for node in order:
        if node not in parent:
            voltages[node] = v_ref
            continue
        e = by_id[parent_edge[node]]
        f = subtree[node]
        flows[e.id] = f
        losses[e.id] = e.resistance * f * f
        voltages[node] = voltages[parent[node]] + f * e.resistance
    for e in edges:
        # cables inside stranded components carry nothing
        flows.setdefault(e.id, 0.0)
        losses.setdefault(e.id, 0.0)
    for n in instance.nodes:
        voltages.setdefault(n.id, v_ref)
    return PowerFlow(parent, parent_edge, flows, voltages, losses, curtailment)


def build_plan(
    instance: WindFarmInstance,
    edges: Iterable[CandidateCable],
    v_ref: float = 1.0,
    allow_stranded: bool = False,
) -> Plan:
    edges = tuple(sorted(edges, key=lambda e: e.id))
    pf = tree_power_flow(instance, edges, v_ref, allow_stranded)
    return Plan(
        edges=edges,
        parent=pf.parent,
        parent_edge=pf.parent_edge,
        flows=pf.flows,
        voltages=pf.voltages,
        losses=pf.losses,
        curtailment=pf.curtailment,
    )


@dataclass(frozen=True)
class CostReport:
    investment: float  # m¥
    operation: float  # m¥
    curtailment_value: float  # m¥
    total: float  # m¥
    cable_length: float  # km
    loss_rate: float  # percent
    loss_mw: float
    generation_mw: float
    n_cables: int
    label: str = ""
    candidate_count: int | None = None
    instance_digest: str | None = None
    stats: dict[str, Any] | None = None
    assumptions: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "investment": self.investment,
            "operation": self.operation,
            "curtailment_value": self.curtailment_value,
            "total": self.total,
            "cable_length": self.cable_length,
            "loss_rate": self.loss_rate,
            "loss_mw": self.loss_mw,
            "generation_mw": self.generation_mw,
            "n_cables": self.n_cables,
            "candidate_count": self.candidate_count,
            "instance_digest": self.instance_digest,
            "stats": self.stats,
            "assumptions": self.assumptions,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "CostReport":
        return cls(**doc)


def electrical_assumptions(instance: WindFarmInstance, config: PlanningConfig) -> dict[str, Any]:
    """Per-unit bases and voltage limits behind a report, with the ones left at defaults named."""
    values = {
        "s_base_mva": instance.base.s_base,
        "v_base_kv": instance.base.v_base,
        "v_lo": config.v_lo,
        "v_hi": config.v_hi,
        "v_ref": config.v_ref,
    }
    base, cfg = PerUnitBase(), PlanningConfig()
    defaults = {
        "s_base_mva": base.s_base,
        "v_base_kv": base.v_base,
        "v_lo": cfg.v_lo,
        "v_hi": cfg.v_hi,
        "v_ref": cfg.v_ref,
    }
    return {**values, "defaulted": [k for k, v in values.items() if v == defaults[k]]}


def investment_cost(length_km: float, cost_per_km: float) -> float:
    return length_km * cost_per_km


def operation_cost(loss_mw: float, cost_model: CostModel) -> float:
    """Lifetime value of a constant loss, in m¥."""
    if not cost_model.losses_enabled:
        return 0.0
    return cost_model.eta_hours * cost_model.energy_price * loss_mw * 1000.0 / 1e6


def cost_breakdown(
    plan: Plan,
    instance: WindFarmInstance,
    cost_model: CostModel,
    label: str = "",
    **extra,
) -> CostReport:
    base = instance.base
    loss_pu = sum(plan.losses.values())
    loss_mw = from_per_unit(loss_pu, base)
    curtailed_pu = sum(plan.curtailment.values())
    generation = instance.total_generation_mw
    investment = plan.investment
    operation = operation_cost(loss_mw, cost_model)
    curtailment_value = cost_model.curtail_penalty * curtailed_pu / 1e6
    return CostReport(
        investment=investment,
        operation=operation,
        curtailment_value=curtailment_value,
        total=investment + operation + curtailment_value,
        cable_length=plan.cable_length,
        loss_rate=100.0 * loss_mw / generation if generation > 0 else 0.0,
        loss_mw=loss_mw,
        generation_mw=generation,
        n_cables=len(plan.edges),
        label=label,
        **extra,
    )


def exact_objective(plan: Plan, instance: WindFarmInstance, cost_model: CostModel) -> float:
    """Total lifetime cost in m¥ with true quadratic losses."""
    return cost_breakdown(plan, instance, cost_model).total


def check_feasibility(
    plan: Plan,
    graph: CandidateGraph,
    config: PlanningConfig,
    allow_curtailment: bool = False,
) -> list[str]:
    """List every violated planning rule; empty for a valid radial plan.

    Flows and voltages are recomputed from the chosen cables, so stale
    numbers stored on the plan cannot hide a violation.
    """
    instance = graph.instance
    problems = []
    try:
        pf = tree_power_flow(instance, plan.edges, config.v_ref, allow_stranded=allow_curtailment)
    except StructureError as exc:
        return [f"radiality: {exc}"]
    expected = len(instance.nodes) - len(instance.substations)
    if not allow_curtailment and len(plan.edges) != expected:
        problems.append(f"radiality: {len(plan.edges)} cables, expected {expected}")
    for e in plan.edges:
        if abs(pf.flows[e.id]) > e.capacity + FLOW_TOL:
            problems.append(
                f"capacity: cable {e.id} ({e.i}-{e.j}) carries {from_per_unit(pf.flows[e.id], instance.base):.3f} MW, "
                f"limit {from_per_unit(e.capacity, instance.base):.3f} MW"
            )
    for n in instance.turbines:
        v = pf.voltages[n.id]
        if v < config.v_lo - VOLTAGE_TOL or v > config.v_hi + VOLTAGE_TOL:
            problems.append(f"voltage: node {n.id} at {v:.6f} p.u. outside [{config.v_lo}, {config.v_hi}]")
    if config.forbid_crossings:
        chosen = {e.id for e in plan.edges}
        for a, b in graph.crossings:
            if a in chosen and b in chosen:
                problems.append(f"crossing: cables {a} and {b} cross")
    if not allow_curtailment:
        curtailed = [k for k, v in pf.curtailment.items() if v > FLOW_TOL]
        if curtailed:
            problems.append(f"curtailment: turbines {curtailed} curtailed")
    pairs: dict[tuple[int, int], int] = {}
    for e in plan.edges:
        pairs[e.endpoints] = pairs.get(e.endpoints, 0) + 1
    for pair, count in pairs.items():
        if count > 1:
            problems.append(f"parallel: {count} cables between nodes {pair}")
    return problems
