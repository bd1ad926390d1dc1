"""GeoJSON and Graphviz DOT renderings of a plan."""

from __future__ import annotations

import json

from ecsplan.evaluate import Plan
from ecsplan.farm import WindFarmInstance, from_per_unit


def geojson_dict(plan: Plan | None, instance: WindFarmInstance) -> dict:
    """FeatureCollection with one Point per node and one LineString per cable.

    Coordinates are kilometres on the local plane of the instance.
    """
    features = []
    for n in instance.nodes:
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [n.x, n.y]},
                "properties": {"id": n.id, "kind": n.kind.value, "gen_mw": n.gen},
            }
        )
    for e in sorted(plan.edges if plan else (), key=lambda e: e.id):
        a, b = instance.nodes[e.i], instance.nodes[e.j]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[a.x, a.y], [b.x, b.y]]},
                "properties": {
                    "edge_id": e.id,
                    "i": e.i,
                    "j": e.j,
                    "flow_mw": from_per_unit(plan.flows.get(e.id, 0.0), instance.base),
                    "loss_mw": from_per_unit(plan.losses.get(e.id, 0.0), instance.base),
                    "length_km": e.length,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def export_geojson(plan: Plan | None, instance: WindFarmInstance) -> str:
    return json.dumps(geojson_dict(plan, instance), indent=1)


def export_dot(plan: Plan | None, instance: WindFarmInstance) -> str:
    lines = ["graph ecs {", "  node [shape=circle];"]
    for n in instance.nodes:
        shape = "box" if n.is_substation else "circle"
        lines.append(f'  {n.id} [label="{n.id}", shape={shape}, pos="{n.x},{n.y}!"];')
    for e in sorted(plan.edges if plan else (), key=lambda e: e.id):
        lines.append(f"  {e.i} -- {e.j};")
    lines.append("}")
    return "\n".join(lines) + "\n"
