"""Radial collector-cable planning for offshore wind farms."""

from ecsplan.farm import (
    CableType,
    CostModel,
    Node,
    NodeKind,
    PerUnitBase,
    PlanningConfig,
    SolverParams,
    WindFarmInstance,
    generate_grid,
    validate_instance,
)

__version__ = "0.1.0"

__all__ = [
    "CableType",
    "CostModel",
    "Node",
    "NodeKind",
    "PerUnitBase",
    "PlanningConfig",
    "SolverParams",
    "WindFarmInstance",
    "generate_grid",
    "validate_instance",
    "__version__",
]
