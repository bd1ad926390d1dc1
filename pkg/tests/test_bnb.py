import math
from dataclasses import replace

import numpy as np
import pytest

from ecsplan.baselines import brute_force_optimal, mst_baseline
from ecsplan.bnb import BranchAndBound, branch_select, compute_gap, solve_milp
from ecsplan.candidates import enumerate_candidates
from ecsplan.evaluate import build_plan, check_feasibility, cost_breakdown
from ecsplan.farm import CostModel, PlanningConfig, SolverParams
from ecsplan.heuristics import greedy_tree, improve_to_plan, local_search, rounding_heuristic
from ecsplan.lp import LpStatus
from ecsplan.model import build_milp

from conftest import make_instance

EXACT = SolverParams(gap_tol=0.0, time_limit_s=60)


def test_branch_select_examples():
    assert branch_select([0.5, 0.9], [0, 1]) == 0
    assert branch_select([0.0, 1.0, 1.0], [0, 1, 2]) is None
    assert branch_select([0.4, 0.6], [0, 1]) == 0
    assert branch_select([0.3, 0.5], [1, 0]) == 1


def test_branch_select_orientation_after_build():
    values = [1.0, 0.0, 0.5, 0.5]
    assert branch_select(values, [0, 1], later_columns=[2, 3]) == 2
    values = [0.7, 0.0, 0.5, 0.5]
    assert branch_select(values, [0, 1], later_columns=[2, 3]) == 0


def test_compute_gap():
    assert compute_gap(100.0, 90.0) == pytest.approx(0.1)
    assert compute_gap(math.inf, 1.0) == math.inf
    assert compute_gap(100.0, 101.0) == 0.0


def solve(fx, cm, params=EXACT):
    model, vm = build_milp(fx.graph, fx.config, cm)
    return solve_milp(model, vm, fx.graph, fx.config, cm, params)


def sandwich_slack(fx, cm, n_edges):
    model, vm = build_milp(fx.graph, fx.config, cm)
    r_max = max(e.resistance for e in fx.graph.edges)
    cap = max(e.capacity for e in fx.graph.edges)
    return n_edges * vm.loss_weight * r_max * (cap / fx.config.pwl_segments) ** 2 / 4


def test_oracle_equivalence_with_losses(oracle_fixture):
    cm = CostModel()
    plan, stats = solve(oracle_fixture, cm)
    _, oracle = brute_force_optimal(oracle_fixture.graph, cm, oracle_fixture.config)
    slack = sandwich_slack(oracle_fixture, cm, len(plan.edges))
    exact = cost_breakdown(plan, oracle_fixture.instance, cm).total
    assert stats.status == "optimal" or stats.gap <= 1e-9
    # solver objective is a lower envelope of the true cost of its own plan
    assert stats.incumbent <= exact + 1e-9
    assert oracle - slack - 1e-9 <= stats.incumbent <= oracle + 1e-9
    assert exact <= oracle + slack + 1e-9
    assert check_feasibility(plan, oracle_fixture.graph, oracle_fixture.config) == []


def test_oracle_equivalence_without_losses(oracle_fixture):
    cm = CostModel(losses_enabled=False)
    plan, stats = solve(oracle_fixture, cm)
    _, oracle = brute_force_optimal(oracle_fixture.graph, cm, oracle_fixture.config)
    assert stats.incumbent == pytest.approx(oracle, rel=1e-6)
    assert plan.investment == pytest.approx(oracle, rel=1e-6)


def crossing_fixture(forbid):
    from conftest import Fixture

    inst = make_instance([(0, 0), (1, 0), (0, 1), (1, 1)], [(0.5, -0.5)])
    cfg = PlanningConfig(max_range_km=1.5, forbid_crossings=forbid)
    return Fixture("square", enumerate_candidates(inst, cfg), cfg)


@pytest.mark.parametrize("forbid", [False, True])
def test_crossing_fixture_against_oracle(forbid):
    fx = crossing_fixture(forbid)
    cm = CostModel()
    plan, stats = solve(fx, cm)
    _, oracle = brute_force_optimal(fx.graph, cm, fx.config)
    slack = sandwich_slack(fx, cm, len(plan.edges))
    assert oracle - slack - 1e-9 <= stats.incumbent <= oracle + 1e-9
    if forbid:
        chosen = set(plan.edge_ids)
        assert not any(a in chosen and b in chosen for a, b in fx.graph.crossings)


def test_gap_tol_one_returns_first_incumbent(fx2x3):
    plan, stats = solve(fx2x3, CostModel(), SolverParams(gap_tol=1.0))
    assert plan is not None
    assert 0.0 <= stats.gap <= 1.0
    assert stats.nodes_explored >= 1
    assert stats.bound <= stats.incumbent + 1e-9
    doc = stats.to_dict()
    assert set(doc) >= {"incumbent", "bound", "gap", "nodes_explored", "wall_time", "status"}


def test_multiworker_matches_single(fx2x3):
    cm = CostModel()
    _, one = solve(fx2x3, cm)
    _, many = solve(fx2x3, cm, replace(EXACT, workers=3))
    assert many.incumbent == pytest.approx(one.incumbent, rel=1e-6)


def test_single_worker_determinism(fx2x3):
    cm = CostModel()
    p1, s1 = solve(fx2x3, cm)
    p2, s2 = solve(fx2x3, cm)
    assert p1.to_dict() == p2.to_dict()
    d1, d2 = s1.to_dict(with_trace=True), s2.to_dict(with_trace=True)
    d1.pop("wall_time"), d2.pop("wall_time")
    assert d1 == d2


class Recording(BranchAndBound):
    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.pairs = []

    def _process(self, node, res, heap, dive):
        if res.status == LpStatus.OPTIMAL:
            self.pairs.append((node.bound, res.objective))
        return super()._process(node, res, heap, dive)


def test_bound_monotonicity(oracle_fixture):
    cm = CostModel()
    model, vm = build_milp(oracle_fixture.graph, oracle_fixture.config, cm)
    bnb = Recording(model, vm, oracle_fixture.graph, oracle_fixture.config, cm, EXACT)
    bnb.solve()
    for parent_bound, child in bnb.pairs:
        assert child >= parent_bound - 1e-9 * max(1.0, abs(child))
    bounds = [b for _, b, _ in bnb.stats.trace]
    assert all(b2 >= b1 for b1, b2 in zip(bounds, bounds[1:]))


def test_progress_lines(fx2x3):
    lines = []
    model, vm = build_milp(fx2x3.graph, fx2x3.config, CostModel())
    solve_milp(model, vm, fx2x3.graph, fx2x3.config, CostModel(), replace(EXACT, log_every=1), progress=lines.append)
    assert lines
    for line in lines:
        keys = [part.split("=")[0] for part in line.split()]
        assert keys == ["nodes", "bound", "incumbent", "gap"]


def test_node_limit_status(fx2x3):
    _, stats = solve(fx2x3, CostModel(), replace(EXACT, max_nodes=1))
    assert stats.status in ("node_limit", "optimal", "gap")
    assert stats.nodes_explored <= 1


def test_mst_investment_not_above_solver(oracle_fixture):
    cm = CostModel()
    plan, _ = solve(oracle_fixture, cm)
    mst = mst_baseline(oracle_fixture.graph, oracle_fixture.config)
    assert mst.investment <= plan.investment + 1e-9


# -- heuristics -----------------------------------------------------------------
def test_rounding_returns_integral_forest(fx2x3):
    graph, cfg = fx2x3.graph, fx2x3.config
    opt, _ = brute_force_optimal(graph, CostModel(), cfg)
    x = np.zeros(len(graph.edges))
    x[opt.edge_ids] = 1.0
    plan = rounding_heuristic(x, graph, cfg)
    assert plan.edge_ids == opt.edge_ids


def test_rounding_all_zero_is_deterministic(fx2x3):
    x = np.zeros(len(fx2x3.graph.edges))
    a = rounding_heuristic(x, fx2x3.graph, fx2x3.config, seed=3)
    b = rounding_heuristic(x, fx2x3.graph, fx2x3.config, seed=3)
    assert (a is None) == (b is None)
    if a is not None:
        assert a.edge_ids == b.edge_ids
        assert check_feasibility(a, fx2x3.graph, fx2x3.config) == []


def test_heuristics_never_beat_oracle(oracle_fixture):
    cm = CostModel()
    graph, cfg = oracle_fixture.graph, oracle_fixture.config
    _, oracle = brute_force_optimal(graph, cm, cfg)
    rng = np.random.default_rng(0)
    for _ in range(5):
        plan = rounding_heuristic(rng.uniform(size=len(graph.edges)), graph, cfg, seed=1)
        if plan is not None:
            assert cost_breakdown(plan, graph.instance, cm).total >= oracle - 1e-9
    ids = greedy_tree(graph, cfg, cm)
    improved = improve_to_plan(ids, graph, cfg, cm, time_budget=5)
    assert improved is not None
    assert cost_breakdown(improved, graph.instance, cm).total >= oracle - 1e-9


def test_local_search_repairs_overload():
    # 11 x 8 MW in a row with substations at both ends; one string from the
    # west substation puts 88 MW on its first cable
    inst = make_instance([(float(k), 0.0) for k in range(1, 12)], [(0.0, 0.0), (12.0, 0.0)])
    cfg = PlanningConfig(max_range_km=1.05)
    graph = enumerate_candidates(inst, cfg)
    string = [e.id for e in graph.edges if 12 not in e.endpoints]
    start = build_plan(inst, [graph.edges[k] for k in string], cfg.v_ref)
    assert any(p.startswith("capacity") for p in check_feasibility(start, graph, cfg))
    fixed = local_search(string, graph, cfg, CostModel(), time_budget=10)
    plan = build_plan(inst, [graph.edges[k] for k in fixed], cfg.v_ref)
    assert check_feasibility(plan, graph, cfg) == []
