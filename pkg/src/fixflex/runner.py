"""Scenario execution and output files.

An inputs directory holds ``nodes.csv``, ``links.csv``, ``demand.csv`` and
optionally ``frt_lines.csv`` and ``zones.csv``. Each scenario writes its
outputs to ``<out>/<scenario_id>/``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from fixflex.config import dump_config
from fixflex.demand import load_demand
from fixflex.equilibrium import Networks, run_equilibrium
from fixflex.errors import FixflexError
from fixflex.fleet import write_event_log
from fixflex.metrics import line_usage, metrics_report, traveler_legs, zones_from_map
from fixflex.network import load_networks, load_zone_map

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2

SUMMARY_COLUMNS = [
    "scenario_id", "status", "converged", "iterations", "final_gap", "subsidy_total",
    "subsidy_per_transit_user", "accessibility_mean", "share_auto", "share_frt", "share_micro",
    "share_walk", "vmt_auto", "vmt_micro", "vmt_frt", "vmt_total", "error",
]


@dataclass
class ScenarioInputs:
    networks: Networks
    demand: list
    zone_map: dict
    directory: Path


def load_inputs(directory, params, seed=0):
    """Read networks, demand and zones from an inputs directory."""
    d = Path(directory)
    for name in ("nodes.csv", "links.csv", "demand.csv"):
        if not (d / name).exists():
            raise FixflexError(f"{d / name}: missing input file")
    frt = d / "frt_lines.csv"
    auto, walk, lines = load_networks(d / "links.csv", frt if frt.exists() else None,
                                      d / "nodes.csv", params.walk_speed_mph,
                                      params.frt_operating_hr)
    demand = load_demand(d / "demand.csv", seed)
    zpath = d / "zones.csv"
    # without a zone file every node is its own zone
    zone_map = load_zone_map(zpath) if zpath.exists() else {n: n for n in auto.nodes}
    used = {t.origin for t in demand} | {t.destination for t in demand}
    unknown = sorted(used - set(auto.nodes))
    if unknown:
        raise FixflexError(f"demand references unknown nodes {unknown[:5]}")
    return ScenarioInputs(Networks(auto, walk, lines), demand, zone_map, d)


def _partition_map(config, inputs):
    if config.partition is None:
        return None
    p = Path(config.partition)
    if not p.is_absolute():
        p = inputs.directory / p
    return load_zone_map(p)


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_iterations_csv(result, path):
    cols = ["iteration", "gap", "transit_count", "auto_count", "expected_transit",
            "micro_requests", "mean_wait_min", "mean_detour_ratio", "served", "rejected",
            "micro_vmt", "flags"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in result.iterations:
            d = rec.to_dict()
            f = d["fleet"] or {}
            w.writerow([d["iteration"], "" if d["gap"] is None else repr(d["gap"]),
                        d["transit_count"], d["auto_count"], repr(d["expected_transit"]),
                        d["micro_requests"], f.get("mean_wait_min", ""),
                        f.get("mean_detour_ratio", ""), f.get("served", ""),
                        f.get("rejected", ""), f.get("vmt", ""), ";".join(d["flags"])])


def write_line_usage_csv(result, path):
    usage = line_usage(result)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["route_id", "from_stop", "to_stop", "from_node", "to_node", "travelers"])
        sn = result.supernet
        for (rid, a, b), n in sorted(usage["links"].items()):
            w.writerow([rid, a, b, sn.street_node(a), sn.street_node(b), n])


def write_legs_csv(result, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rq_id", "chosen_mode", "leg", "leg_mode", "from_node", "to_node",
                    "distance_mi", "time_min"])
        for o in result.outcomes:
            for k, (mode, a, b, dist, minutes) in enumerate(traveler_legs(o, result.supernet)):
                w.writerow([o.rq_id, o.mode.value, k, mode, a, b, f"{dist:.6f}",
                            f"{minutes:.6f}"])


def accessibility_geojson(supernet, zones, counts):
    """Zone bounding boxes as polygons, in the node coordinate system."""
    feats = []
    for z, members in sorted(zones.items()):
        xs = [supernet.nodes[n].x for n in members]
        ys = [supernet.nodes[n].y for n in members]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        ring = [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
        feats.append({
            "type": "Feature",
            "properties": {"zone_id": z, "jobs_15min": counts[str(z)], "n_nodes": len(members)},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    return {"type": "FeatureCollection", "features": feats}


def run_scenario(config, inputs, out_dir):
    """Build, equilibrate, measure and write outputs. Returns (exit code, report)."""
    out = Path(out_dir) / config.scenario_id
    out.mkdir(parents=True, exist_ok=True)
    dump_config(config, out / "config.yaml")
    with (out / "iterations.jsonl").open("w") as jl:
        result = run_equilibrium(config, inputs.demand, inputs.networks, config.params,
                                 _partition_map(config, inputs), iteration_log=jl)
    zones = zones_from_map({n: z for n, z in inputs.zone_map.items()
                            if n in inputs.networks.auto.nodes})
    report = metrics_report(result, zones, config.params)
    _dump_json(report, out / "metrics.json")
    write_iterations_csv(result, out / "iterations.csv")
    write_line_usage_csv(result, out / "line_usage.csv")
    write_legs_csv(result, out / "legs.csv")
    _dump_json(accessibility_geojson(result.supernet, zones, report["accessibility_15min"]),
               out / "accessibility.geojson")
    write_event_log(result.fleet_run.events if result.fleet_run else [], out / "events.csv")
    if not result.converged:
        log.warning("scenario %s did not converge in %d iterations (gap %s)",
                    config.scenario_id, len(result.iterations), report["final_gap"])
    return (EXIT_OK if result.converged else EXIT_NOT_CONVERGED), report


def summary_row(config, report=None, error=None):
    row = dict.fromkeys(SUMMARY_COLUMNS, "")
    row["scenario_id"] = config.scenario_id
    if report is None:
        row["status"] = "failed"
        row["error"] = str(error)
        return row
    c, s, v = report["costs"], report["mode_share_pct"], report["vmt"]
    row.update({
        "status": "ok",
        "converged": report["converged"],
        "iterations": report["iterations"],
        "final_gap": "" if report["final_gap"] is None else repr(report["final_gap"]),
        "subsidy_total": repr(c["subsidy_total"]),
        "subsidy_per_transit_user": "" if c["subsidy_per_transit_user"] is None
        else repr(c["subsidy_per_transit_user"]),
        "accessibility_mean": repr(report["accessibility_mean"]),
        "share_auto": repr(s["Auto"]), "share_frt": repr(s["FRT"]),
        "share_micro": repr(s["Micro"]), "share_walk": repr(s["Walk"]),
        "vmt_auto": repr(v["auto"]), "vmt_micro": repr(v["micro"]),
        "vmt_frt": repr(v["frt"]), "vmt_total": repr(v["total"]),
    })
    return row


def _batch_worker(args):
    config, input_dir, out_dir = args
    try:
        inputs = load_inputs(input_dir, config.params, config.master_seed)
        _, report = run_scenario(config, inputs, out_dir)
        return summary_row(config, report)
    except Exception as exc:  # a failed scenario must not stop the batch
        log.error("scenario %s failed: %s", config.scenario_id, exc)
        return summary_row(config, error=f"{type(exc).__name__}: {exc}")


def run_batch(configs, input_dir, out_dir, jobs=1):
    """Run scenarios (in parallel when jobs > 1) and write summary.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(c, str(input_dir), str(out)) for c in configs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_batch_worker, tasks))
    else:
        rows = [_batch_worker(t) for t in tasks]
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows


def validate_inputs(directory, params):
    """Load everything and return a list of human-readable findings."""
    inputs = load_inputs(directory, params)
    auto = inputs.networks.auto
    notes = [f"{len(auto.nodes)} nodes, {len(auto.edges)} street links, "
             f"{len(inputs.networks.frt_lines)} FRT lines, {len(inputs.demand)} travelers"]
    adj = auto.successors()
    dead = [n for n in auto.nodes if not adj.get(n)]
    if dead:
        notes.append(f"warning: {len(dead)} nodes without outgoing links, e.g. {dead[:5]}")
    if any(math.isnan(n.jobs) for n in auto.nodes.values()):
        notes.append("warning: NaN job counts")
    return notes
