"""Candidate cable enumeration within a maximum range, and crossing detection."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Iterable

from ecsplan.farm import (
    CableType,
    InvalidArgument,
    PlanningConfig,
    WindFarmInstance,
    resistance_to_per_unit,
    to_per_unit,
)
from ecsplan.geometry import EPS, segments_cross


class IsolatedNodeError(ValueError):
    def __init__(self, node_ids):
        self.node_ids = tuple(node_ids)
        super().__init__(f"turbine(s) {list(self.node_ids)} have no candidate cable within range")


@dataclass(frozen=True)
class CandidateCable:
    id: int
    i: int
    j: int
    length: float  # km
    type_index: int
    cost: float  # m¥
    resistance: float  # p.u.
    capacity: float  # p.u.

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.i, self.j)

    def other(self, node: int) -> int:
        return self.j if node == self.i else self.i

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "i": self.i,
            "j": self.j,
            "length_km": self.length,
            "type_index": self.type_index,
            "cost": self.cost,
            "resistance": self.resistance,
            "capacity": self.capacity,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "CandidateCable":
        return cls(
            id=int(doc["id"]),
            i=int(doc["i"]),
            j=int(doc["j"]),
            length=float(doc["length_km"]),
            type_index=int(doc["type_index"]),
            cost=float(doc["cost"]),
            resistance=float(doc["resistance"]),
            capacity=float(doc["capacity"]),
        )


@dataclass(frozen=True)
class CandidateGraph:
    instance: WindFarmInstance
    edges: tuple[CandidateCable, ...]
    crossings: tuple[tuple[int, int], ...] = ()
    adjacency: dict[int, tuple[int, ...]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "crossings", tuple(tuple(p) for p in self.crossings))
        if not self.adjacency:
            adj: dict[int, list[int]] = {n.id: [] for n in self.instance.nodes}
            for e in self.edges:
                adj[e.i].append(e.id)
                adj[e.j].append(e.id)
            object.__setattr__(self, "adjacency", {k: tuple(v) for k, v in adj.items()})
        for pos, e in enumerate(self.edges):
            if e.id != pos:
                raise InvalidArgument(f"edge ids must be contiguous from 0, edge {e.id} at {pos}")

    def edge(self, edge_id: int) -> CandidateCable:
        return self.edges[edge_id]

    def segment(self, edge_id: int):
        e = self.edges[edge_id]
        return (self.instance.nodes[e.i].coord, self.instance.nodes[e.j].coord)

    def with_crossings(self, crossings) -> "CandidateGraph":
        return CandidateGraph(self.instance, self.edges, tuple(crossings), self.adjacency)

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance": self.instance.to_dict(),
            "edges": [e.to_dict() for e in self.edges],
            "crossings": [list(p) for p in self.crossings],
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "CandidateGraph":
        instance = WindFarmInstance.from_dict(doc["instance"])
        edges = tuple(CandidateCable.from_dict(e) for e in doc["edges"])
        crossings = tuple(tuple(int(v) for v in p) for p in doc.get("crossings", ()))
        return cls(instance, edges, crossings)


def make_cable(
    instance: WindFarmInstance, edge_id: int, i: int, j: int, type_index: int, cable: CableType
) -> CandidateCable:
    i, j = min(i, j), max(i, j)
    if i == j:
        raise InvalidArgument(f"self-loop cable at node {i}")
    length = instance.distance(i, j)
    return CandidateCable(
        id=edge_id,
        i=i,
        j=j,
        length=length,
        type_index=type_index,
        cost=cable.cost_per_km * length,
        resistance=resistance_to_per_unit(cable.resistance_ohm_per_km, length, instance.base),
        capacity=to_per_unit(cable.capacity_mw, instance.base),
    )


def graph_from_pairs(
    instance: WindFarmInstance,
    pairs: Iterable[tuple[int, int]],
    config: PlanningConfig,
    type_index: int = 0,
) -> CandidateGraph:
    """Graph over an explicit list of node pairs, one cable type."""
    cable = config.cable_types[type_index]
    edges = [make_cable(instance, k, i, j, type_index, cable) for k, (i, j) in enumerate(pairs)]
    graph = CandidateGraph(instance, tuple(edges))
    return graph.with_crossings(find_crossings(graph))


def enumerate_candidates(
    instance: WindFarmInstance,
    config: PlanningConfig,
    detect_crossings: bool = True,
) -> CandidateGraph:
    """All node pairs within ``config.max_range_km``, one cable per type.

    Pairs listed in ``config.substation_links`` are added regardless of
    distance. Raises :class:`IsolatedNodeError` if a turbine ends up with
    no candidate.
    """
    pairs = []
    for a, b in combinations(range(len(instance.nodes)), 2):
        if instance.distance(a, b) <= config.max_range_km + EPS:
            pairs.append((a, b))
    in_range = set(pairs)
    for a, b in config.substation_links:
        key = (min(a, b), max(a, b))
        if not (instance.nodes[a].is_substation or instance.nodes[b].is_substation):
            raise InvalidArgument(f"injected link {key} has no substation endpoint")
        if key not in in_range:
            in_range.add(key)
            pairs.append(key)
    pairs.sort()

    edges = []
    for a, b in pairs:
        for t, cable in enumerate(config.cable_types):
            edges.append(make_cable(instance, len(edges), a, b, t, cable))

    touched = {n for e in edges for n in e.endpoints}
    isolated = [n.id for n in instance.turbines if n.id not in touched]
    if isolated:
        raise IsolatedNodeError(isolated)

    graph = CandidateGraph(instance, tuple(edges))
    if detect_crossings:
        graph = graph.with_crossings(find_crossings(graph))
    return graph


def find_crossings(graph: CandidateGraph) -> list[tuple[int, int]]:
    """Sorted list of (a, b), a < b, of node-disjoint candidates that cross."""
    boxes = []
    for e in graph.edges:
        (x1, y1), (x2, y2) = graph.segment(e.id)
        boxes.append((min(x1, x2), max(x1, x2), min(y1, y2), max(y1, y2)))
    found = []
    edges = graph.edges
    for a in range(len(edges)):
        ea, ba = edges[a], boxes[a]
        seg_a = graph.segment(a)
        for b in range(a + 1, len(edges)):
            eb, bb = edges[b], boxes[b]
            if ea.i in (eb.i, eb.j) or ea.j in (eb.i, eb.j):
                continue
            if bb[0] > ba[1] + EPS or ba[0] > bb[1] + EPS or bb[2] > ba[3] + EPS or ba[2] > bb[3] + EPS:
                continue
            if segments_cross(seg_a, graph.segment(b)):
                found.append((a, b))
    return found
