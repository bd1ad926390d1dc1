"""Branch-and-bound over the LP relaxation of the planning MILP."""

from __future__ import annotations

import heapq
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ecsplan.candidates import CandidateGraph
from ecsplan.evaluate import Plan, StructureError, build_plan, check_feasibility
from ecsplan.farm import CostModel, PlanningConfig, SolverParams
from ecsplan.heuristics import greedy_tree, improve_to_plan, rounding_heuristic
from ecsplan.lp import Basis, LpData, LpStatus, choose_backend, solve_lp
from ecsplan.model import MilpModel, VarMap, plan_to_columns

log = logging.getLogger("ecsplan.solver")

REL_TOL = 1e-6


@dataclass
class SolveStats:
    incumbent: float = math.inf
    bound: float = -math.inf
    gap: float = math.inf
    nodes_explored: int = 0
    wall_time: float = 0.0
    status: str = "unsolved"
    lp_iterations: int = 0
    backend: str = ""
    trace: list[tuple[int, float, float]] = field(default_factory=list)

    def to_dict(self, with_trace: bool = False) -> dict:
        doc = asdict(self)
        if not with_trace:
            doc.pop("trace")
        for key in ("incumbent", "bound", "gap"):
            if not math.isfinite(doc[key]):
                doc[key] = None
        return doc


def branch_select(values, columns, integrality_tol: float = 1e-6, later_columns=()) -> int | None:
    """Most fractional binary among ``columns``; lowest column index wins ties.

    ``later_columns`` (orientation binaries) are only examined when every
    column in ``columns`` (build binaries) is integral.
    """
    for group in (columns, later_columns):
        best, best_frac = None, integrality_tol
        for col in sorted(group):
            v = values[col]
            frac = min(v - math.floor(v), math.ceil(v) - v)
            if frac > best_frac + 1e-12:
                best, best_frac = col, frac
        if best is not None:
            return best
    return None


def compute_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    if not math.isfinite(bound):
        return math.inf
    return max(0.0, (incumbent - bound) / max(abs(incumbent), 1e-12))


@dataclass(order=True)
class _Node:
    key: tuple
    bound: float = field(compare=False)
    lo: dict = field(compare=False)
    hi: dict = field(compare=False)
    depth: int = field(compare=False)
    basis: Basis | None = field(compare=False, default=None)


class BranchAndBound:
    def __init__(
        self,
        model: MilpModel,
        varmap: VarMap,
        graph: CandidateGraph,
        config: PlanningConfig,
        cost_model: CostModel,
        params: SolverParams | None = None,
        progress: Callable[[str], None] | None = None,
    ):
        self.model = model
        self.varmap = varmap
        self.graph = graph
        self.config = config
        self.cost_model = cost_model
        self.params = params or config.solver
        self.progress = progress
        self.backend = choose_backend(model, self.params.lp_backend)
        self.data = LpData.from_model(model) if self.backend == "simplex" else None
        self.base_lo, self.base_hi = model.bounds()
        self.stats = SolveStats(backend=self.backend)
        self.best_plan: Plan | None = None
        self.best_values: np.ndarray | None = None
        self._counter = 0
        self._seen_trees: set[tuple[int, ...]] = set()

    # -- helpers --------------------------------------------------------
    def _tick(self) -> int:
        self._counter += 1
        return self._counter

    def _solve_node(self, node: _Node):
        lo = self.base_lo.copy()
        hi = self.base_hi.copy()
        for c, v in node.lo.items():
            lo[c] = v
        for c, v in node.hi.items():
            hi[c] = v
        return solve_lp(self.model, lo, hi, node.basis, self.backend, data=self.data)

    def _offer_plan(self, plan: Plan | None, source: str) -> bool:
        if plan is None:
            return False
        values = plan_to_columns(plan, self.model, self.varmap, self.graph)
        if self.model.violations(values):
            return False
        obj = self.model.objective_value(values)
        if obj < self.stats.incumbent - 1e-12 * max(1.0, abs(obj)):
            self.stats.incumbent = obj
            self.best_plan = plan
            self.best_values = values
            log.debug("new incumbent %.6f from %s", obj, source)
            return True
        return False

    def _offer_edges(self, edge_ids, source: str) -> bool:
        key = tuple(sorted(edge_ids))
        if key in self._seen_trees:
            return False
        self._seen_trees.add(key)
        budget = max(1.0, min(30.0, self.params.time_limit_s / 20))
        plan = improve_to_plan(edge_ids, self.graph, self.config, self.cost_model, budget)
        return self._offer_plan(plan, source)

    def _plan_from_values(self, values) -> Plan | None:
        chosen = [e for e in self.graph.edges if values[self.varmap.x[e.id]] > 0.5]
        try:
            plan = build_plan(self.graph.instance, chosen, self.config.v_ref)
        except StructureError:
            return None
        if check_feasibility(plan, self.graph, self.config):
            return None
        return plan

    def _run_heuristics(self, values, first: bool):
        x = np.array([values[c] for c in self.varmap.x])
        plan = rounding_heuristic(x, self.graph, self.config, seed=self.params.seed)
        self._offer_plan(plan, "rounding")
        if plan is not None:
            self._offer_edges(plan.edge_ids, "rounding+ls")
        self._offer_edges(greedy_tree(self.graph, self.config, self.cost_model, bias=x), "greedy-lp")
        if first:
            self._offer_edges(greedy_tree(self.graph, self.config, self.cost_model), "greedy")

    def _record(self, open_bound: float):
        bound = min(open_bound, self.stats.incumbent)
        if bound > self.stats.bound:
            self.stats.bound = bound
        self.stats.gap = compute_gap(self.stats.incumbent, self.stats.bound)
        self.stats.trace.append((self.stats.nodes_explored, self.stats.bound, self.stats.incumbent))

    def _emit(self):
        s = self.stats
        line = f"nodes={s.nodes_explored} bound={s.bound:.6f} incumbent={s.incumbent:.6f} gap={s.gap:.6f}"
        log.info(line)
        if self.progress:
            self.progress(line)

    # -- main loop ------------------------------------------------------
    def solve(self) -> tuple[Plan | None, SolveStats]:
        p = self.params
        start = time.monotonic()
        deadline = start + p.time_limit_s
        stats = self.stats
        root = _Node((0.0, 0, 0), -math.inf, {}, {}, 0)
        heap: list[_Node] = []
        dive: list[_Node] = [root]
        pool = ThreadPoolExecutor(p.workers) if p.workers > 1 else None
        stop_reason = None
        try:
            while heap or dive:
                if time.monotonic() > deadline:
                    stop_reason = "time_limit"
                    break
                if stats.nodes_explored >= p.max_nodes:
                    stop_reason = "node_limit"
                    break
                batch = []
                while len(batch) < max(1, p.workers) and (dive or heap):
                    node = dive.pop() if dive else heapq.heappop(heap)
                    if node.bound >= stats.incumbent - self._prune_tol():
                        continue
                    batch.append(node)
                if not batch:
                    continue
                if pool is not None and len(batch) > 1:
                    results = list(pool.map(self._solve_node, batch))
                else:
                    results = [self._solve_node(n) for n in batch]
                for node, res in zip(batch, results):
                    self._process(node, res, heap, dive)
                open_bound = min([n.bound for n in dive] + ([heap[0].bound] if heap else []), default=math.inf)
                self._record(open_bound)
                if stats.nodes_explored % max(1, p.log_every) == 0:
                    self._emit()
                if math.isfinite(stats.incumbent) and stats.gap <= p.gap_tol:
                    stop_reason = "gap"
                    break
        finally:
            if pool is not None:
                pool.shutdown()

        if stop_reason is None:
            # tree exhausted: the incumbent is optimal (or none exists)
            stats.bound = stats.incumbent if math.isfinite(stats.incumbent) else math.inf
            stats.gap = 0.0 if math.isfinite(stats.incumbent) else math.inf
            stats.status = "optimal" if self.best_plan is not None else "infeasible"
            stats.trace.append((stats.nodes_explored, stats.bound, stats.incumbent))
        else:
            stats.status = stop_reason if self.best_plan is not None else f"{stop_reason}_no_incumbent"
        stats.wall_time = time.monotonic() - start
        self._emit()
        return self.best_plan, stats

    def _prune_tol(self) -> float:
        inc = self.stats.incumbent
        return REL_TOL * max(1.0, abs(inc)) if math.isfinite(inc) else 0.0

    def _process(self, node: _Node, res, heap, dive):
        stats = self.stats
        stats.nodes_explored += 1
        stats.lp_iterations += res.iterations
        if res.status != LpStatus.OPTIMAL:
            return
        bound = max(res.objective, node.bound)
        first = stats.nodes_explored == 1
        if first or stats.nodes_explored % max(1, self.params.heuristic_every) == 0:
            self._run_heuristics(res.values, first)
        if bound >= stats.incumbent - self._prune_tol():
            return
        col = branch_select(res.values, self.varmap.x, self.params.integrality_tol, self.varmap.bp + self.varmap.bm)
        if col is None:
            plan = self._plan_from_values(res.values)
            if plan is not None:
                self._offer_plan(plan, "lp-integral")
            return
        v = res.values[col]
        down = _Node((bound, node.depth + 1, self._tick()), bound, node.lo, {**node.hi, col: 0.0}, node.depth + 1, res.basis)
        up = _Node((bound, node.depth + 1, self._tick()), bound, {**node.lo, col: 1.0}, node.hi, node.depth + 1, res.basis)
        if not math.isfinite(stats.incumbent):
            # dive towards the nearer integer first
            first_child, second = (up, down) if v >= 0.5 else (down, up)
            dive.append(second)
            dive.append(first_child)
        else:
            while dive:
                heapq.heappush(heap, dive.pop())
            heapq.heappush(heap, down)
            heapq.heappush(heap, up)


def solve_milp(
    model: MilpModel,
    varmap: VarMap,
    graph: CandidateGraph,
    config: PlanningConfig,
    cost_model: CostModel,
    params: SolverParams | None = None,
    progress: Callable[[str], None] | None = None,
) -> tuple[Plan | None, SolveStats]:
    """Best-bound branch-and-bound with depth-first dives until an incumbent exists."""
    return BranchAndBound(model, varmap, graph, config, cost_model, params, progress).solve()
