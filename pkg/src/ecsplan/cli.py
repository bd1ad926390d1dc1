"""Command-line front end.

Every flag can also come from ``--config file.json``: keys of the section
named after the subcommand (dashes become underscores), e.g.
``{"plan": {"time_limit": 60, "gap": 0.01}}``. Flags given on the command
line win. ``planning`` and ``cost_model`` sections feed the planning
config and cost model of the ``plan``, ``evaluate``, ``baseline`` and
``build-candidates`` commands.

Exit status: 0 on success, 1 when a plan has violations or the solve found
no feasible plan, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ecsplan import __version__
from ecsplan.baselines import DEFAULT_CASE1_SUBSTATION, baseline_string_layout, mst_baseline
from ecsplan.bnb import solve_milp
from ecsplan.candidates import CandidateGraph, enumerate_candidates
from ecsplan.evaluate import Plan, build_plan, check_feasibility, cost_breakdown, electrical_assumptions
from ecsplan.export import export_dot, export_geojson
from ecsplan.farm import (
    InvalidArgument,
    PlanningConfig,
    WindFarmInstance,
    cost_model_from_dict,
    generate_grid,
    require_valid,
    validate_instance,
)
from ecsplan.model import build_milp
from ecsplan.mps import export_mps
from ecsplan.pipeline import PipelineError, document_digest, run_pipeline, write_json
from ecsplan.report import compare_reports, comparison_csv
from ecsplan.siting import place_substations

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


def _read(path) -> dict:
    return json.loads(Path(path).read_text())


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_json(doc, out: str | None) -> None:
    _emit(json.dumps(doc, indent=1), out)


def _stderr(line: str) -> None:
    print(line, file=sys.stderr, flush=True)


def _planning(args) -> PlanningConfig:
    return PlanningConfig.from_dict(args.planning_doc)


def _plan_from_file(path, graph: CandidateGraph, config: PlanningConfig) -> tuple[Plan, dict | None]:
    """Load a plan document and recompute its flows from the chosen cables."""
    doc = _read(path)
    stored = Plan.from_dict(doc, graph)
    stranded = any(v > 0 for v in stored.curtailment.values())
    plan = build_plan(graph.instance, stored.edges, config.v_ref, allow_stranded=stranded)
    return plan, doc.get("stats")


# -- subcommands --------------------------------------------------------------
def cmd_generate_grid(args) -> int:
    inst = generate_grid(args.rows, args.cols, args.row_spacing, args.col_spacing, args.power)
    _emit_json(inst.to_dict(), args.out)
    return EXIT_OK


def cmd_site_substations(args) -> int:
    inst = WindFarmInstance.from_dict(_read(args.instance))
    sited = place_substations(
        inst, c=args.count, m=args.m, seed=args.seed, capacity_weighted=args.capacity_weighted
    )
    require_valid(validate_instance(sited))
    _emit_json(sited.to_dict(), args.out)
    return EXIT_OK


def cmd_build_candidates(args) -> int:
    inst = WindFarmInstance.from_dict(_read(args.instance))
    require_valid(validate_instance(inst))
    config = _planning(args)
    if args.range is not None:
        config = replace(config, max_range_km=args.range)
    graph = enumerate_candidates(inst, config)
    _stderr(f"candidates={len(graph.edges)} crossings={len(graph.crossings)}")
    _emit_json(graph.to_dict(), args.out)
    return EXIT_OK


def cmd_plan(args) -> int:
    graph = CandidateGraph.from_dict(_read(args.graph))
    config = _planning(args)
    solver = config.solver
    overrides = {
        "time_limit_s": args.time_limit,
        "gap_tol": args.gap,
        "workers": args.workers,
        "seed": args.seed,
        "max_nodes": args.max_nodes,
        "lp_backend": args.backend,
        "log_every": args.log_every,
    }
    solver = replace(solver, **{k: v for k, v in overrides.items() if v is not None})
    config = replace(config, solver=solver)
    if args.pwl_segments is not None:
        config = replace(config, pwl_segments=args.pwl_segments)
    if args.forbid_crossings:
        config = replace(config, forbid_crossings=True)
    require_valid(config.validate())
    cost_model = cost_model_from_dict(args.cost_model_doc)
    if args.no_losses:
        cost_model = replace(cost_model, losses_enabled=False)
    model, varmap = build_milp(graph, config, cost_model)
    _stderr(f"model columns={model.n_cols} rows={model.n_rows}")
    plan, stats = solve_milp(model, varmap, graph, config, cost_model, solver, progress=_stderr)
    _stderr(f"status={stats.status} gap={stats.gap:.6f} wall_time={stats.wall_time:.2f}s")
    if plan is None:
        return EXIT_VIOLATION
    _emit_json({**plan.to_dict(), "stats": stats.to_dict()}, args.out)
    return EXIT_VIOLATION if check_feasibility(plan, graph, config) else EXIT_OK


def cmd_evaluate(args) -> int:
    graph = CandidateGraph.from_dict(_read(args.graph))
    config = _planning(args)
    cost_model = cost_model_from_dict(args.cost_model_doc)
    plan, stats = _plan_from_file(args.plan, graph, config)
    violations = check_feasibility(plan, graph, config, allow_curtailment=args.allow_curtailment)
    report = cost_breakdown(
        plan,
        graph.instance,
        cost_model,
        label=args.label,
        candidate_count=len(graph.edges),
        instance_digest=document_digest(graph.instance.to_dict()),
        stats=stats,
        assumptions=electrical_assumptions(graph.instance, config),
    )
    doc = report.to_dict()
    doc["violations"] = violations
    _emit_json(doc, args.out)
    for v in violations:
        _stderr(f"violation: {v}")
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_baseline(args) -> int:
    config = _planning(args)
    cost_model = cost_model_from_dict(args.cost_model_doc)
    if args.case == "string":
        if not args.instance:
            raise InvalidArgument("baseline --case string needs --instance")
        inst = WindFarmInstance.from_dict(_read(args.instance))
        turbines = WindFarmInstance(tuple(inst.turbines), inst.base)
        position = tuple(args.substation) if args.substation else DEFAULT_CASE1_SUBSTATION
        plan, graph = baseline_string_layout(turbines, position, config)
    else:
        if not args.graph:
            raise InvalidArgument("baseline --case mst needs --graph")
        graph = CandidateGraph.from_dict(_read(args.graph))
        plan = mst_baseline(graph, config)
    violations = check_feasibility(plan, graph, config)
    report = cost_breakdown(
        plan,
        graph.instance,
        cost_model,
        label=args.label or f"baseline-{args.case}",
        candidate_count=len(graph.edges),
        instance_digest=document_digest(graph.instance.to_dict()),
        assumptions=electrical_assumptions(graph.instance, config),
    )
    doc = report.to_dict()
    doc["violations"] = violations
    _emit_json(doc, args.out)
    if args.plan_out:
        write_json(Path(args.plan_out), {**plan.to_dict(), "graph": graph.to_dict()})
    for v in violations:
        _stderr(f"violation: {v}")
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_compare(args) -> int:
    from ecsplan.evaluate import CostReport

    reports = []
    for path in args.reports:
        doc = _read(path)
        doc.pop("violations", None)
        reports.append(CostReport.from_dict(doc))
    table = compare_reports(reports)
    if table["warning"]:
        _stderr(f"warning: {table['warning']}")
    if args.format == "csv":
        _emit(comparison_csv(table), args.out)
    else:
        _emit_json(table, args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    graph = CandidateGraph.from_dict(_read(args.graph))
    config = _planning(args)
    if args.format == "mps":
        cost_model = cost_model_from_dict(args.cost_model_doc)
        model, _ = build_milp(graph, config, cost_model)
        _emit(export_mps(model), args.out)
        return EXIT_OK
    plan = _plan_from_file(args.plan, graph, config)[0] if args.plan else None
    render = export_geojson if args.format == "geojson" else export_dot
    _emit(render(plan, graph.instance), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    config = dict(args.config_doc)
    if args.seed is not None:
        config["seed"] = args.seed
    base_dir = Path(args.config).parent if args.config else None
    try:
        result = run_pipeline(config, args.out_dir, progress=_stderr, base_dir=base_dir)
    except PipelineError as exc:
        _stderr(str(exc))
        return EXIT_VIOLATION if exc.stage == "solve" else EXIT_INPUT
    r = result.report
    _stderr(
        f"total={r.total:.4f} investment={r.investment:.4f} operation={r.operation:.4f} "
        f"length={r.cable_length:.4f}km loss_rate={r.loss_rate:.4f}% gap={r.stats.get('gap')}"
    )
    return EXIT_VIOLATION if result.violations else EXIT_OK


# -- parser ---------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecsplan", description="Offshore wind farm collector cable planning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON config document; flags override it")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate-grid", help="regular turbine grid instance")
    s.add_argument("--rows", type=int, default=7)
    s.add_argument("--cols", type=int, default=9)
    s.add_argument("--row-spacing", type=float, default=1.0, help="km")
    s.add_argument("--col-spacing", type=float, default=1.3, help="km")
    s.add_argument("--power", type=float, default=8.0, help="MW per turbine")
    s.add_argument("--out")
    s.set_defaults(func=cmd_generate_grid)

    s = sub.add_parser("site-substations", help="place substations by fuzzy c-means")
    s.add_argument("--instance", required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--m", type=float, default=2.0, help="fuzzifier")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--capacity-weighted", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_site_substations)

    s = sub.add_parser("build-candidates", help="enumerate candidate cables and crossings")
    s.add_argument("--instance", required=True)
    s.add_argument("--range", type=float, help="max cable length in km")
    s.add_argument("--out")
    s.set_defaults(func=cmd_build_candidates)

    s = sub.add_parser("plan", help="solve the planning MILP")
    s.add_argument("--graph", required=True)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--gap", type=float)
    s.add_argument("--workers", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--max-nodes", type=int)
    s.add_argument("--backend", choices=["auto", "simplex", "highs"])
    s.add_argument("--log-every", type=int)
    s.add_argument("--pwl-segments", type=int)
    s.add_argument("--forbid-crossings", action="store_true")
    s.add_argument("--no-losses", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("evaluate", help="exact costs and feasibility of a plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--label", default="planned")
    s.add_argument("--allow-curtailment", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("baseline", help="string or minimum-spanning-tree reference layout")
    s.add_argument("--case", choices=["string", "mst"], required=True)
    s.add_argument("--instance", help="turbine grid (string case)")
    s.add_argument("--graph", help="candidate graph (mst case)")
    s.add_argument("--substation", type=float, nargs=2, metavar=("X", "Y"))
    s.add_argument("--label", default="")
    s.add_argument("--plan-out", help="also write the baseline plan with its graph")
    s.add_argument("--out")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("compare", help="side-by-side table of reports")
    s.add_argument("reports", nargs="+")
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("export", help="GeoJSON, DOT or MPS rendering")
    s.add_argument("format", choices=["geojson", "dot", "mps"])
    s.add_argument("--graph", required=True)
    s.add_argument("--plan")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("run", help="full pipeline from a config document")
    s.add_argument("--out-dir", default="run")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_run)
    return p


def _apply_config(parser: argparse.ArgumentParser, doc: dict) -> None:
    """Install config-file values as subparser defaults."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in sub.choices.items():
        section = doc.get(name) or {}
        if not isinstance(section, dict):
            continue
        known = {a.dest for a in sp._actions}
        values = {k.replace("-", "_"): v for k, v in section.items()}
        unknown = set(values) - known
        if unknown:
            raise InvalidArgument(f"config section '{name}': unknown keys {sorted(unknown)}")
        sp.set_defaults(**values)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser = build_parser()
    config_doc: dict = {}
    try:
        if known.config:
            config_doc = _read(known.config)
            _apply_config(parser, config_doc)
    except (OSError, ValueError) as exc:
        _stderr(f"error: {exc}")
        return EXIT_INPUT
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    args.config_doc = config_doc
    args.planning_doc = config_doc.get("planning", {})
    args.cost_model_doc = config_doc.get("cost_model", {})
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _stderr(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
