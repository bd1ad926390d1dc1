"""End-to-end run: site, enumerate, build, solve, evaluate, with a manifest.

A run is driven by one config document::

    {
      "seed": 7,
      "grid": {"rows": 7, "cols": 9, "row_spacing": 1.0, "col_spacing": 1.3, "wt_power": 8.0},
      "instance": "path/to/instance.json",      # alternative to "grid"
      "siting": {"count": 1, "m": 2.0, "capacity_weighted": false},
      "planning": {... PlanningConfig fields ...},
      "cost_model": {... CostModel fields ...}
    }

Every section is optional; the default is the 7 x 9 grid of 8 MW turbines.
"""

from __future__ import annotations

import hashlib
import json
import time
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from ecsplan import __version__
from ecsplan.bnb import solve_milp
from ecsplan.candidates import enumerate_candidates, find_crossings
from ecsplan.evaluate import CostReport, Plan, check_feasibility, cost_breakdown, electrical_assumptions
from ecsplan.farm import (
    PlanningConfig,
    WindFarmInstance,
    cost_model_from_dict,
    generate_grid,
    require_valid,
    validate_instance,
)
from ecsplan.model import build_milp
from ecsplan.siting import place_substations

DEFAULT_GRID = {"rows": 7, "cols": 9, "row_spacing": 1.0, "col_spacing": 1.3, "wt_power": 8.0}


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def document_digest(doc: Any) -> str:
    """sha256 of the canonical JSON encoding of ``doc``."""
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def sub_seed(seed: int, stage: str) -> int:
    """Deterministic per-stage seed derived from the run seed."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


def write_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")


@dataclass
class RunManifest:
    config: dict
    seed: int
    version: str = __version__
    input_digests: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    status: str = "running"
    failed_stage: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunManifest":
        return cls(**doc)


@dataclass
class RunResult:
    report: CostReport
    plan: Plan
    manifest: RunManifest
    violations: list[str]


def _load_instance(config: dict, base_dir: Path | None) -> WindFarmInstance:
    if "instance" in config:
        ref = config["instance"]
        if isinstance(ref, dict):
            return WindFarmInstance.from_dict(ref)
        path = Path(ref)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return WindFarmInstance.from_dict(json.loads(path.read_text()))
    grid = {**DEFAULT_GRID, **config.get("grid", {})}
    return generate_grid(**grid)


def planning_config(config: dict) -> PlanningConfig:
    doc = dict(config.get("planning", {}))
    seed = config.get("seed")
    cfg = PlanningConfig.from_dict(doc)
    if seed is not None and "seed" not in doc.get("solver", {}):
        cfg = replace(cfg, solver=replace(cfg.solver, seed=sub_seed(seed, "solve") % 2**31))
    return cfg


def run_pipeline(
    config: dict,
    out_dir: str | Path,
    progress=None,
    base_dir: str | Path | None = None,
) -> RunResult:
    """Run every stage in order and write instance/graph/plan/report/manifest JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("seed", 7))
    manifest = RunManifest(config=json.loads(json.dumps(config)), seed=seed)
    base = Path(base_dir) if base_dir is not None else None
    stage = "config"
    state: dict[str, Any] = {}

    def save(name: str, doc: Any):
        path = out / f"{name}.json"
        write_json(path, doc)
        manifest.artifacts[name] = path.name

    try:
        t = time.perf_counter()
        cfg = planning_config(config)
        cost_model = cost_model_from_dict(config.get("cost_model"))
        require_valid(cfg.validate())
        manifest.timings[stage] = time.perf_counter() - t

        stage = "site"
        t = time.perf_counter()
        instance = _load_instance(config, base)
        manifest.input_digests["input_instance"] = document_digest(instance.to_dict())
        if not instance.substations:
            siting = config.get("siting", {})
            instance = place_substations(
                instance,
                c=int(siting.get("count", 1)),
                m=float(siting.get("m", 2.0)),
                seed=sub_seed(seed, "site") % 2**31,
                capacity_weighted=bool(siting.get("capacity_weighted", False)),
            )
        require_valid(validate_instance(instance))
        require_valid(cost_model.validate(instance.base))
        save("instance", instance.to_dict())
        manifest.input_digests["instance"] = document_digest(instance.to_dict())
        manifest.timings[stage] = time.perf_counter() - t

        stage = "candidates"
        t = time.perf_counter()
        graph = enumerate_candidates(instance, cfg, detect_crossings=False)
        manifest.timings[stage] = time.perf_counter() - t

        stage = "crossings"
        t = time.perf_counter()
        graph = graph.with_crossings(find_crossings(graph))
        save("graph", graph.to_dict())
        manifest.input_digests["graph"] = document_digest(graph.to_dict())
        manifest.timings[stage] = time.perf_counter() - t

        stage = "build"
        t = time.perf_counter()
        model, varmap = build_milp(graph, cfg, cost_model)
        manifest.timings[stage] = time.perf_counter() - t

        stage = "solve"
        t = time.perf_counter()
        plan, stats = solve_milp(model, varmap, graph, cfg, cost_model, cfg.solver, progress)
        manifest.timings[stage] = time.perf_counter() - t
        if plan is None:
            raise RuntimeError(f"no feasible plan found (status {stats.status})")
        state["stats"] = stats.to_dict()
        save("plan", {**plan.to_dict(), "stats": state["stats"]})

        stage = "evaluate"
        t = time.perf_counter()
        violations = check_feasibility(plan, graph, cfg)
        report = cost_breakdown(
            plan,
            instance,
            cost_model,
            label=config.get("label", "planned"),
            candidate_count=len(graph.edges),
            instance_digest=manifest.input_digests["instance"],
            stats=state["stats"],
            assumptions=electrical_assumptions(instance, cfg),
        )
        save("report", report.to_dict())
        manifest.timings[stage] = time.perf_counter() - t
    except Exception as exc:
        manifest.status = "failed"
        manifest.failed_stage = stage
        manifest.error = f"{type(exc).__name__}: {exc}"
        save("manifest", manifest.to_dict())
        raise PipelineError(stage, exc) from exc

    manifest.status = "infeasible" if violations else "ok"
    save("manifest", manifest.to_dict())
    return RunResult(report=report, plan=plan, manifest=manifest, violations=violations)
