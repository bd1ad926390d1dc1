"""Wind farm instances, per-unit conversion and planning configuration.

Everything here is immutable. Solver-side math works in per-unit on the
``PerUnitBase`` of the instance; reports convert back to MW, km and
million yuan (m¥).
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Sequence


class InvalidArgument(ValueError):
    """Raised when an operation receives arguments outside its domain."""


class NodeKind(str, enum.Enum):
    WIND_TURBINE = "WindTurbine"
    SUBSTATION = "Substation"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    x: float
    y: float
    gen: float = 0.0

    @property
    def coord(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def is_substation(self) -> bool:
        return self.kind is NodeKind.SUBSTATION


@dataclass(frozen=True)
class PerUnitBase:
    s_base: float = 100.0  # MVA
    v_base: float = 66.0  # kV

    def __post_init__(self):
        if not (self.s_base > 0 and self.v_base > 0):
            raise InvalidArgument(f"per-unit bases must be positive, got {self}")

    @property
    def z_base(self) -> float:
        """Impedance base in ohm."""
        return self.v_base**2 / self.s_base


def to_per_unit(mw: float, base: PerUnitBase) -> float:
    """Active power in MW -> p.u."""
    return mw / base.s_base


def from_per_unit(pu: float, base: PerUnitBase) -> float:
    return pu * base.s_base


def resistance_to_per_unit(ohm_per_km: float, length_km: float, base: PerUnitBase) -> float:
    return ohm_per_km * length_km * base.s_base / base.v_base**2


def resistance_from_per_unit(r_pu: float, length_km: float, base: PerUnitBase) -> float:
    """Inverse of :func:`resistance_to_per_unit`, returns ohm/km."""
    return r_pu * base.v_base**2 / (base.s_base * length_km)


@dataclass(frozen=True)
class WindFarmInstance:
    nodes: tuple[Node, ...]
    base: PerUnitBase = field(default_factory=PerUnitBase)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def turbines(self) -> list[Node]:
        return [n for n in self.nodes if not n.is_substation]

    @property
    def substations(self) -> list[Node]:
        return [n for n in self.nodes if n.is_substation]

    @property
    def total_generation_mw(self) -> float:
        return sum(n.gen for n in self.nodes)

    def gen_pu(self, node_id: int) -> float:
        return to_per_unit(self.nodes[node_id].gen, self.base)

    def with_nodes(self, extra: Iterable[Node]) -> "WindFarmInstance":
        return replace(self, nodes=self.nodes + tuple(extra))

    def distance(self, i: int, j: int) -> float:
        a, b = self.nodes[i], self.nodes[j]
        return math.hypot(a.x - b.x, a.y - b.y)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [
                {"id": n.id, "kind": n.kind.value, "x_km": n.x, "y_km": n.y, "gen_mw": n.gen}
                for n in self.nodes
            ],
            "base": {"s_base_mva": self.base.s_base, "v_base_kv": self.base.v_base},
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "WindFarmInstance":
        nodes = tuple(
            Node(
                id=int(n["id"]),
                kind=NodeKind(n["kind"]),
                x=float(n["x_km"]),
                y=float(n["y_km"]),
                gen=float(n["gen_mw"]),
            )
            for n in doc["nodes"]
        )
        base_doc = doc.get("base") or {}
        base = PerUnitBase(
            s_base=float(base_doc.get("s_base_mva", 100.0)),
            v_base=float(base_doc.get("v_base_kv", 66.0)),
        )
        return cls(nodes=nodes, base=base)


def generate_grid(
    rows: int,
    cols: int,
    row_spacing: float,
    col_spacing: float,
    wt_power: float,
    base: PerUnitBase | None = None,
) -> WindFarmInstance:
    """Regular rows x cols turbine grid, row-major ids, node 0 at the origin.

    Turbine ``r * cols + c`` sits at ``(c * col_spacing, r * row_spacing)``.
    """
    if rows < 1 or cols < 1:
        raise InvalidArgument(f"grid needs rows, cols >= 1, got {rows}x{cols}")
    if row_spacing <= 0 or col_spacing <= 0:
        raise InvalidArgument("grid spacings must be positive")
    if wt_power <= 0:
        raise InvalidArgument("turbine power must be positive")
    nodes = tuple(
        Node(r * cols + c, NodeKind.WIND_TURBINE, c * col_spacing, r * row_spacing, wt_power)
        for r in range(rows)
        for c in range(cols)
    )
    return WindFarmInstance(nodes=nodes, base=base or PerUnitBase())


def validate_instance(instance: WindFarmInstance) -> list[str]:
    """Return human-readable invariant violations; empty when the instance is valid."""
    problems = []
    for pos, node in enumerate(instance.nodes):
        if node.id != pos:
            problems.append(f"node {node.id}: ids must be contiguous from 0 (found at position {pos})")
        if node.gen < 0:
            problems.append(f"node {node.id}: negative generation {node.gen}")
        if node.is_substation and node.gen != 0:
            problems.append(f"node {node.id}: substation must have zero generation, has {node.gen}")
        if not node.is_substation and node.gen == 0:
            problems.append(f"node {node.id}: wind turbine must have positive generation")
    if not instance.substations:
        problems.append("instance: at least one substation required")
    if not instance.turbines:
        problems.append("instance: at least one wind turbine required")
    seen: dict[tuple[float, float], int] = {}
    for node in instance.nodes:
        other = seen.get(node.coord)
        if other is not None:
            problems.append(f"nodes {other} and {node.id}: identical coordinates {node.coord}")
        else:
            seen[node.coord] = node.id
    return problems


@dataclass(frozen=True)
class CableType:
    cost_per_km: float = 4.0  # m¥/km
    resistance_ohm_per_km: float = 0.0241
    capacity_mw: float = 80.0

    def __post_init__(self):
        if min(self.cost_per_km, self.resistance_ohm_per_km, self.capacity_mw) <= 0:
            raise InvalidArgument(f"cable type fields must be positive: {self}")


@dataclass(frozen=True)
class CostModel:
    """Money side of the objective.

    ``energy_price`` is in ¥/kWh, ``eta_hours`` converts one snapshot of
    losses into lifetime energy, ``curtail_penalty`` is ¥ per p.u. of
    curtailed power. Cable prices live on :class:`CableType`.
    """

    energy_price: float = 0.8513
    eta_hours: float = 20 * 2500.0
    curtail_penalty: float = 1e11
    losses_enabled: bool = True

    def loss_value_per_pu(self, base: PerUnitBase) -> float:
        """Lifetime value of 1 p.u. of loss, in ¥."""
        if not self.losses_enabled:
            return 0.0
        return self.eta_hours * self.energy_price * base.s_base * 1000.0

    def validate(self, base: PerUnitBase) -> list[str]:
        problems = []
        if self.energy_price <= 0 or self.eta_hours <= 0 or self.curtail_penalty <= 0:
            problems.append("cost model: price, eta_hours and curtail_penalty must be positive")
        floor = self.eta_hours * self.energy_price * base.s_base * 1000.0
        if self.curtail_penalty <= floor:
            problems.append(
                f"cost model: curtail_penalty {self.curtail_penalty:g} must exceed "
                f"lifetime loss value {floor:g} ¥/p.u."
            )
        return problems


@dataclass(frozen=True)
class SolverParams:
    time_limit_s: float = 900.0
    gap_tol: float = 1e-4
    max_nodes: int = 1_000_000
    workers: int = 1
    seed: int = 7
    integrality_tol: float = 1e-6
    lp_backend: str = "auto"
    log_every: int = 50
    heuristic_every: int = 25


@dataclass(frozen=True)
class PlanningConfig:
    max_range_km: float = 2.0
    cable_types: tuple[CableType, ...] = (CableType(),)
    v_lo: float = 0.95
    v_hi: float = 1.05
    v_ref: float = 1.0
    pwl_segments: int = 16
    forbid_crossings: bool = False
    substation_links: tuple[tuple[int, int], ...] = ()
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        object.__setattr__(self, "cable_types", tuple(self.cable_types))
        object.__setattr__(
            self, "substation_links", tuple(tuple(p) for p in self.substation_links)
        )

    def validate(self) -> list[str]:
        problems = []
        if not (0 < self.v_lo < self.v_ref <= self.v_hi):
            problems.append(
                f"config: need 0 < v_lo < v_ref <= v_hi, got {self.v_lo}, {self.v_ref}, {self.v_hi}"
            )
        if self.max_range_km <= 0:
            problems.append("config: max_range_km must be positive")
        if not self.cable_types:
            problems.append("config: at least one cable type required")
        if self.pwl_segments < 1:
            problems.append("config: pwl_segments must be >= 1")
        return problems

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["cable_types"] = [asdict(c) for c in self.cable_types]
        doc["substation_links"] = [list(p) for p in self.substation_links]
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "PlanningConfig":
        doc = dict(doc)
        if "cable_types" in doc:
            doc["cable_types"] = tuple(CableType(**c) for c in doc["cable_types"])
        if "substation_links" in doc:
            doc["substation_links"] = tuple(tuple(int(v) for v in p) for p in doc["substation_links"])
        if "solver" in doc:
            doc["solver"] = SolverParams(**doc["solver"])
        return cls(**doc)


def cost_model_from_dict(doc: dict[str, Any] | None) -> CostModel:
    return CostModel(**(doc or {}))


def require_valid(problems: Sequence[str]) -> None:
    if problems:
        raise InvalidArgument("; ".join(problems))
