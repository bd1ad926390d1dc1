"""Shared small instances.

The oracle fixtures are kept at <= 9 nodes so exhaustive enumeration of
spanning forests stays instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import pytest

from ecsplan.candidates import CandidateGraph, enumerate_candidates
from ecsplan.farm import (
    CostModel,
    Node,
    NodeKind,
    PlanningConfig,
    WindFarmInstance,
    generate_grid,
)
from ecsplan.siting import place_substations

WT, SUB = NodeKind.WIND_TURBINE, NodeKind.SUBSTATION


@dataclass
class Fixture:
    name: str
    graph: CandidateGraph
    config: PlanningConfig

    @property
    def instance(self) -> WindFarmInstance:
        return self.graph.instance


def make_instance(turbines, substations, power=8.0) -> WindFarmInstance:
    nodes = [Node(k, WT, float(x), float(y), power) for k, (x, y) in enumerate(turbines)]
    nodes += [Node(len(nodes) + k, SUB, float(x), float(y)) for k, (x, y) in enumerate(substations)]
    return WindFarmInstance(tuple(nodes))


def grid_2x3() -> Fixture:
    inst = place_substations(generate_grid(2, 3, 1.0, 1.3, 8.0), 1)
    cfg = PlanningConfig(max_range_km=1.5)
    return Fixture("grid2x3", enumerate_candidates(inst, cfg), cfg)


def triangle() -> Fixture:
    # equilateral: every candidate has the same length and cost
    inst = make_instance([(0.0, 0.0), (1.0, 0.0)], [(0.5, math.sqrt(3) / 2)])
    cfg = PlanningConfig(max_range_km=1.5)
    return Fixture("triangle", enumerate_candidates(inst, cfg), cfg)


def path() -> Fixture:
    # substation at the west end of a 4-turbine line; range reaches two hops
    inst = make_instance([(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)], [(0.0, 0.0)])
    cfg = PlanningConfig(max_range_km=2.05)
    return Fixture("path", enumerate_candidates(inst, cfg), cfg)


ORACLE_FIXTURES = {"grid2x3": grid_2x3, "triangle": triangle, "path": path}


@pytest.fixture(params=sorted(ORACLE_FIXTURES))
def oracle_fixture(request) -> Fixture:
    return ORACLE_FIXTURES[request.param]()


@pytest.fixture
def fx2x3() -> Fixture:
    return grid_2x3()


@pytest.fixture
def cost_model() -> CostModel:
    return CostModel()


@pytest.fixture(scope="session")
def case63():
    """7 x 9 reference grid with one FCM substation and the default 2 km range."""
    inst = place_substations(generate_grid(7, 9, 1.0, 1.3, 8.0), 1)
    cfg = PlanningConfig(max_range_km=2.0)
    return Fixture("case63", enumerate_candidates(inst, cfg), cfg)
