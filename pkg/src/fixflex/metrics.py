"""Performance metrics of an equilibrated design: costs, subsidy,
accessibility, mode shares, VMT, line usage and trip lengths."""
from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from fixflex.choice import Mode
from fixflex.fleet import SERVED
from fixflex.network import LinkType

MODES4 = ("Auto", "FRT", "Micro", "Walk")
TIME_BUCKETS = (("AM", 5, 10), ("MD", 10, 15), ("PM", 15, 20), ("EV", 20, 24))


@dataclass(frozen=True)
class CostCoefficients:
    frt_labor_per_hr: float = 170.0
    frt_gas_per_mile: float = 0.350
    micro_labor_per_hr: float = 130.0
    micro_gas_per_mile: float = 0.305
    frt_fare: float = 2.5
    micro_fare_per_mile: float = 1.97

    @classmethod
    def from_params(cls, p):
        return cls(p.frt_labor_per_hr, p.frt_gas_per_mile, p.micro_labor_per_hr,
                   p.micro_gas_per_mile, p.frt_fare, p.micro_fare_per_mile)


@dataclass
class CostBreakdown:
    frt_cost: float
    micro_cost: float
    frt_revenue: float
    micro_revenue: float
    subsidy_total: float
    subsidy_per_transit_user: float | None
    transit_users: int
    frt_paying_riders: int
    micro_passenger_miles: float
    coefficients: CostCoefficients = field(default_factory=CostCoefficients)
    flags: tuple = ()


def frt_line_cost(line, coeffs=CostCoefficients()):
    """Daily labor plus fuel cost of one line run in both directions.

    Labor: vehicles in service per direction (duration / headway) times
    operating hours times the hourly rate. Fuel: runs per direction over
    the day times line length times the per-mile rate.
    """
    h = line.headway_min
    if h <= 0:
        raise ValueError(f"line {line.route_id}: headway must be positive")
    labor = 2.0 * (line.duration_min / h) * line.operating_hr * coeffs.frt_labor_per_hr
    gas = 2.0 * (line.operating_hr * 60.0 / h) * line.length_mi * coeffs.frt_gas_per_mile
    return labor + gas


def frt_system_cost(lines, coeffs=CostCoefficients()):
    return float(sum(frt_line_cost(l, coeffs) for l in lines))


def micro_system_cost(operating_hours, fleet_size, vmt, coeffs=CostCoefficients()):
    if operating_hours < 0 or fleet_size < 0 or vmt < 0:
        raise ValueError("micro cost inputs must be nonnegative")
    return operating_hours * fleet_size * coeffs.micro_labor_per_hr + vmt * coeffs.micro_gas_per_mile


def frt_vmt(lines):
    return float(sum(2.0 * (l.operating_hr * 60.0 / l.headway_min) * l.length_mi for l in lines))


def transit_class(outcome):
    """Auto, Micro (any micro leg), FRT (any FRT leg) or Walk."""
    if outcome.mode is not Mode.TRANSIT:
        return "Auto"
    t = outcome.transit
    if t is None:
        return "Walk"
    if t.uses_micro:
        return "Micro"
    if t.uses_frt:
        return "FRT"
    return "Walk"


def revenues_and_subsidy(result, coeffs=None):
    scenario = result.scenario
    coeffs = coeffs or CostCoefficients.from_params(scenario.params)
    classes = [transit_class(o) for o in result.outcomes]
    transit_users = sum(1 for o, c in zip(result.outcomes, classes)
                        if o.mode is Mode.TRANSIT and c in ("FRT", "Micro"))
    frt_riders = sum(1 for o in result.outcomes
                     if o.mode is Mode.TRANSIT and o.transit is not None and o.transit.uses_frt)
    records = result.fleet_run.records if result.fleet_run else []
    pax_miles = float(sum(r.distance_mi for r in records if r.status == SERVED))
    vmt_m = result.fleet_run.stats.vmt if result.fleet_run else 0.0
    frt_cost = frt_system_cost(result.supernet.frt_lines, coeffs)
    fleet = scenario.fleet_size if result.supernet.micro_enabled else 0
    micro_cost = micro_system_cost(scenario.micro_operating_hours if fleet else 0.0, fleet, vmt_m,
                                   coeffs)
    frt_rev = coeffs.frt_fare * frt_riders
    micro_rev = coeffs.micro_fare_per_mile * pax_miles
    subsidy = (frt_cost + micro_cost) - (frt_rev + micro_rev)
    per_user = subsidy / transit_users if transit_users else None
    flags = () if transit_users else ("no_transit_users",)
    return CostBreakdown(frt_cost, micro_cost, frt_rev, micro_rev, subsidy, per_user,
                         transit_users, frt_riders, pax_miles, coeffs, flags)


def zones_from_map(zone_map):
    zones = defaultdict(list)
    for nid, z in sorted(zone_map.items()):
        zones[z].append(nid)
    return dict(zones)


def reachable_within(supernet, origin, budget_s, period=None):
    """Walk-layer nodes reachable from ``origin`` within ``budget_s`` seconds."""
    micro = supernet.micro_enabled and period is not None
    adj = supernet.adjacency(period, micro=micro)
    budget = budget_s / 60.0
    dist = {origin: 0.0}
    heap = [(0.0, origin)]
    done = set()
    while heap:
        c, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for to, _, minutes, _, _, _ in adj.get(u, ()):
            nc = c + minutes
            if nc <= budget + 1e-12 and nc < dist.get(to, math.inf):
                dist[to] = nc
                heapq.heappush(heap, (nc, to))
    return {n for n in done if supernet.layer_index[n] == "walk"}


def default_accessibility_period(supernet):
    if supernet.micro_enabled and supernet.operating_periods:
        return supernet.operating_periods[0][0]
    return None


def accessibility_15min(supernet, zones, budget_min=15.0, period="default"):
    """Mean count of jobs reachable within the budget from each zone's nodes.

    Pure travel time (walk, wait, ride, transfer), no fares or weights.
    ``zones`` maps zone id -> list of walk node ids. Micro links count only
    when ``period`` names an operating period; the default is the first.
    """
    if period == "default":
        period = default_accessibility_period(supernet)
    out = {}
    for z, members in sorted(zones.items()):
        if not members:
            raise ValueError(f"zone {z} has no nodes")
        counts = []
        for o in members:
            reach = reachable_within(supernet, o, budget_min * 60.0, period)
            counts.append(sum(supernet.nodes[n].jobs for n in reach))
        out[z] = float(np.mean(counts))
    return out


def vmt_summary(result):
    auto = float(sum(o.auto.distance for o in result.outcomes
                     if o.mode is Mode.AUTO and o.auto is not None))
    micro = result.fleet_run.stats.vmt if result.fleet_run else 0.0
    frt = frt_vmt(result.supernet.frt_lines)
    return {"auto": auto, "micro": micro, "frt": frt, "total": auto + micro + frt}


def mode_shares(result):
    counts = dict.fromkeys(MODES4, 0)
    for o in result.outcomes:
        counts[transit_class(o)] += 1
    n = len(result.outcomes)
    return {m: (100.0 * counts[m] / n if n else 0.0) for m in MODES4}, counts


def _bucket(t):
    h = t / 3600.0
    for name, lo, hi in TIME_BUCKETS:
        if lo <= h < hi:
            return name
    return "EV"


def line_usage(result):
    """Per-link and per-route FRT usage of the final transit paths."""
    link_counts = defaultdict(int)
    route_traversals = defaultdict(int)
    route_riders = defaultdict(set)
    route_buckets = defaultdict(lambda: dict.fromkeys([b[0] for b in TIME_BUCKETS], 0))
    for o in result.outcomes:
        if o.mode is not Mode.TRANSIT or o.transit is None:
            continue
        seen = set()
        for link in o.transit.links:
            if link.link_type != LinkType.FRT_RIDE:
                continue
            link_counts[(link.route_id, link.from_node, link.to_node)] += 1
            route_traversals[link.route_id] += 1
            route_riders[link.route_id].add(o.rq_id)
            if link.route_id not in seen:
                route_buckets[link.route_id][_bucket(o.dp_time)] += 1
                seen.add(link.route_id)
    routes = {}
    for line in result.supernet.frt_lines:
        rid = line.route_id
        routes[rid] = {
            "link_traversals": route_traversals.get(rid, 0),
            "unique_riders": len(route_riders.get(rid, ())),
            "riders_by_period": dict(route_buckets[rid]),
        }
    links = {}
    for l in result.supernet.links:
        if l.link_type == LinkType.FRT_RIDE:
            key = (l.route_id, l.from_node, l.to_node)
            links[key] = link_counts.get(key, 0)
    return {"routes": routes, "links": links}


def traveler_legs(outcome, supernet):
    """Chosen-mode legs as (mode, from street node, to street node, miles, minutes)."""
    if outcome.mode is Mode.AUTO:
        a = outcome.auto
        return [("auto", a.nodes[0], a.nodes[-1], a.distance, a.auto_ivtt)] if a else []
    t = outcome.transit
    if t is None:
        return []
    period = supernet.period_of(outcome.dp_time)
    family = {LinkType.WALK: "walk", LinkType.FRT_RIDE: "frt", LinkType.FRT_WAIT: "frt",
              LinkType.FRT_TRANSFER: "frt", LinkType.MICRO_RIDE: "micro",
              LinkType.MICRO_WAIT: "micro"}
    legs = []
    for link in t.links:
        fam = family[link.link_type]
        # alighting links close the leg they belong to
        if link.link_type in (LinkType.FRT_WAIT, LinkType.MICRO_WAIT) and not link.boarding:
            fam = legs[-1][0] if legs else fam
        minutes = supernet.link_time(link, period) / 60.0
        a, b = supernet.street_node(link.from_node), supernet.street_node(link.to_node)
        if legs and legs[-1][0] == fam:
            m, s, _, d, tm = legs[-1]
            legs[-1] = (m, s, b, d + link.length, tm + minutes)
        else:
            legs.append((fam, a, b, link.length, minutes))
    return legs


def trip_length_distribution(result, bin_width=0.25):
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    per_mode = defaultdict(list)
    totals = defaultdict(list)
    for o in result.outcomes:
        legs = traveler_legs(o, result.supernet)
        for mode, _, _, dist, _ in legs:
            per_mode[mode].append(dist)
        if legs:
            totals[transit_class(o)].append(sum(l[3] for l in legs))

    def hist(values):
        if not values:
            return {"edges": [], "counts": [], "mean": None, "n": 0}
        top = max(values)
        nbins = max(1, int(math.floor(top / bin_width)) + 1)
        edges = np.arange(nbins + 1) * bin_width
        counts, _ = np.histogram(values, bins=edges)
        return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts],
                "mean": float(np.mean(values)), "n": len(values)}

    return {
        "bin_width": bin_width,
        "legs": {m: hist(per_mode.get(m, [])) for m in ("walk", "micro", "frt", "auto")},
        "trips": {m: hist(totals.get(m, [])) for m in MODES4},
    }


def metrics_report(result, zones, params=None):
    """Everything written to metrics.json, as plain JSON-ready values."""
    params = params or result.scenario.params
    costs = revenues_and_subsidy(result, CostCoefficients.from_params(params))
    shares, counts = mode_shares(result)
    access = accessibility_15min(result.supernet, zones, params.accessibility_budget_min)
    usage = line_usage(result)
    last = result.iterations[-1]
    cost_dict = asdict(costs)
    cost_dict["flags"] = list(costs.flags)
    return {
        "scenario_id": result.scenario.scenario_id,
        "converged": result.converged,
        "iterations": len(result.iterations),
        "final_gap": None if math.isinf(last.convergence_gap) else last.convergence_gap,
        "costs": cost_dict,
        "mode_share_pct": shares,
        "mode_counts": counts,
        "expected_transit_share_pct": 100.0 * float(last.probs.mean()) if len(last.probs) else 0.0,
        "vmt": vmt_summary(result),
        "accessibility_15min": {str(z): v for z, v in access.items()},
        "accessibility_period": default_accessibility_period(result.supernet),
        "accessibility_mean": float(np.mean(list(access.values()))) if access else 0.0,
        "line_usage": usage["routes"],
        "fleet": result.fleet_run.stats.to_dict() if result.fleet_run else None,
        "trip_lengths": trip_length_distribution(result),
    }
