"""Stop-based ride-pooling fleet simulation with immediate-response insertion.

Requests are handled one at a time in arrival order. Each is inserted into
the vehicle schedule with the smallest added drive time among feasible
insertions (capacity, maximum wait, maximum detour), or rejected. Vehicles
move node by node along shortest micro-layer routes; a moving vehicle can
only be re-routed from the next node it reaches. Drive times are whole
seconds so pooled ride times compare exactly against direct times.
"""
from __future__ import annotations

import bisect
import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from fixflex.network import LinkType
from fixflex.router import shortest_path_tree

SERVED = "Served"
REJECTED = "Rejected"


@dataclass(frozen=True)
class FleetParams:
    capacity: int = 8
    max_wait_s: float = 1200.0
    max_detour: float = 2.0
    reposition: bool = True
    reposition_window_s: float = 3600.0
    reposition_scale_s: float = 600.0
    seed: int = 0

    @classmethod
    def from_params(cls, p, seed=0):
        return cls(p.vehicle_capacity, p.max_wait_min * 60.0, p.max_detour, p.reposition,
                   p.reposition_window_min * 60.0, p.reposition_scale_s, seed)


@dataclass(frozen=True)
class RideRequest:
    rq_id: int
    request_time: float
    pickup_stop: int
    dropoff_stop: int
    walk_access: float = 0.0   # min
    walk_egress: float = 0.0   # min
    traveler_id: int = -1
    leg: int = 0
    distance_mi: float = 0.0

    def __post_init__(self):
        if self.pickup_stop == self.dropoff_stop:
            raise ValueError(f"request {self.rq_id}: pickup equals dropoff")


@dataclass(frozen=True)
class ServiceRecord:
    rq_id: int
    status: str
    wait_time: float = math.nan   # min
    ivtt: float = math.nan        # min
    direct_time: float = math.nan  # min
    detour_ratio: float = math.nan
    reason: str = ""
    traveler_id: int = -1
    period: str | None = None
    vehicle_id: int = -1
    distance_mi: float = 0.0


@dataclass(frozen=True)
class PeriodStats:
    mean_wait: float | None
    mean_detour_ratio: float | None
    served: int
    rejected: int


@dataclass(frozen=True)
class FleetStats:
    mean_wait: float | None   # min, None when nothing was served
    mean_detour_ratio: float | None
    vmt: float
    served: int
    rejected: int
    by_period: dict = field(default_factory=dict)

    @property
    def requests(self):
        return self.served + self.rejected

    @property
    def rejection_rate(self):
        return self.rejected / self.requests if self.requests else 0.0

    def to_dict(self):
        return {
            "mean_wait_min": self.mean_wait,
            "mean_detour_ratio": self.mean_detour_ratio,
            "vmt": self.vmt,
            "served": self.served,
            "rejected": self.rejected,
            "by_period": {k: vars(v) if not hasattr(v, "_asdict") else v._asdict()
                          for k, v in sorted(self.by_period.items())},
        }


class Event(NamedTuple):
    time_s: float
    vehicle_id: int
    event: str
    node_id: int
    rq_id: int  # -1 when not tied to a request


class FleetRun(NamedTuple):
    records: list
    stats: FleetStats
    events: list


class FleetNetwork:
    """Street graph the vehicles drive on, with cached shortest paths."""

    def __init__(self, edges, stops, zones=None):
        # edges: iterable of (from, to, seconds, miles); parallel links keep the fastest
        best = {}
        for a, b, t, length in edges:
            t = int(round(t))
            if (a, b) not in best or (t, length) < best[(a, b)]:
                best[(a, b)] = (t, length)
        self.edge = best
        self.adj = defaultdict(list)
        for (a, b), (t, length) in sorted(best.items()):
            self.adj[a].append((b, t, length))
        self.nodes = sorted({a for a, _ in best} | {b for _, b in best} | set(stops))
        self.stops = sorted(stops)
        self.zones = zones or {}
        self._trees = {}

    @classmethod
    def from_supernetwork(cls, supernet):
        off = supernet.micro_offset
        edges = [(l.from_node - off, l.to_node - off, l.base_time, l.length)
                 for l in supernet.links if l.link_type == LinkType.MICRO_RIDE]
        stops = [s - off for s in supernet.virtual_stops]
        zones = {nid - off: n.zone_id for nid, n in supernet.nodes.items()
                 if supernet.layer_index[nid] == "micro"}
        return cls(edges, stops, zones)

    def tree(self, source):
        if source not in self._trees:
            self._trees[source] = shortest_path_tree(self.adj, source)
        return self._trees[source]

    def tt(self, a, b):
        if a == b:
            return 0
        return self.tree(a).dist.get(b, math.inf)

    def path(self, a, b):
        return self.tree(a).path_to(b)

    def distance(self, a, b):
        p = self.path(a, b)
        return sum(self.edge[(u, v)][1] for u, v in zip(p, p[1:]))


@dataclass
class Task:
    kind: str  # "pickup" | "dropoff"
    rq_id: int
    node: int


@dataclass
class Vehicle:
    vehicle_id: int
    capacity: int
    node: int
    time: float = 0.0
    route: list = field(default_factory=list)   # [(node, arrival_s), ...] ahead of `node`
    tasks: list = field(default_factory=list)
    onboard: dict = field(default_factory=dict)  # rq_id -> pickup time
    odometer: float = 0.0
    reposition_target: int | None = None

    @property
    def idle(self):
        return not self.tasks

    def anchor(self, now):
        """Next node where the plan can change, and the time it is reached."""
        if self.route:
            return self.route[0]
        return self.node, max(self.time, now)


class _Context:
    def __init__(self, net, params, requests):
        self.net = net
        self.params = params
        self.requests = requests  # rq_id -> RideRequest
        self.direct = {}

    def direct_time(self, rq_id):
        if rq_id not in self.direct:
            r = self.requests[rq_id]
            self.direct[rq_id] = self.net.tt(r.pickup_stop, r.dropoff_stop)
        return self.direct[rq_id]


def _evaluate(tasks, anchor_node, anchor_time, onboard, capacity, ctx):
    """End time of a task sequence, or None if it breaks a constraint."""
    p = ctx.params
    node, t = anchor_node, anchor_time
    load = len(onboard)
    picked = dict(onboard)
    for task in tasks:
        dt = ctx.net.tt(node, task.node)
        if dt == math.inf:
            return None
        t += dt
        node = task.node
        req = ctx.requests[task.rq_id]
        if task.kind == "pickup":
            load += 1
            if load > capacity:
                return None
            if t > req.request_time + p.max_wait_s + 1e-9:
                return None
            picked[task.rq_id] = t
        else:
            load -= 1
            ride = t - picked[task.rq_id]
            if ride > p.max_detour * ctx.direct_time(task.rq_id) + 1e-9:
                return None
    return t


@dataclass(frozen=True)
class Insertion:
    feasible: bool
    cost: float = math.inf
    pickup_pos: int = -1
    dropoff_pos: int = -1
    tasks: tuple = ()


def insertion_cost(vehicle, request, params, net, now, ctx=None):
    """Best insertion of ``request`` into the vehicle schedule.

    Tries every pickup position i and dropoff position j >= i in the pending
    task list. Cost is the added drive time in seconds.
    """
    if ctx is None:
        ctx = _Context(net, params, {request.rq_id: request})
    ctx.requests.setdefault(request.rq_id, request)
    a_node, a_time = vehicle.anchor(now)
    old_end = _evaluate(vehicle.tasks, a_node, a_time, vehicle.onboard, vehicle.capacity, ctx)
    if old_end is None:
        old_end = a_time  # shouldn't happen: existing plans stay feasible as time advances
    pick = Task("pickup", request.rq_id, request.pickup_stop)
    drop = Task("dropoff", request.rq_id, request.dropoff_stop)
    best = Insertion(False)
    n = len(vehicle.tasks)
    for i in range(n + 1):
        for j in range(i, n + 1):
            seq = list(vehicle.tasks)
            seq.insert(j, drop)
            seq.insert(i, pick)
            end = _evaluate(seq, a_node, a_time, vehicle.onboard, vehicle.capacity, ctx)
            if end is None:
                continue
            cost = end - old_end
            if cost < best.cost:
                best = Insertion(True, cost, i, j, tuple(seq))
    return best


def reposition_vehicle(vehicle, demand_weights, net, scale_s=600.0):
    """Virtual stop maximizing weight / (1 + travel_time / scale).

    ``demand_weights`` maps stop -> weight; when empty or all zero every stop
    weighs the same, which sends the vehicle to the nearest stop.
    """
    stops = net.stops
    total = sum(demand_weights.get(s, 0.0) for s in stops)
    best = None
    for s in stops:
        tt = net.tt(vehicle.node, s)
        if tt == math.inf:
            continue
        w = demand_weights.get(s, 0.0) / total if total > 0 else 1.0
        score = w / (1.0 + tt / scale_s)
        key = (-score, tt, s)
        if best is None or key < best[0]:
            best = (key, s)
    return vehicle.node if best is None else best[1]


def compute_detour_ratio(records, default=1.2):
    """Mean detour ratio over served records -> (ratio, used_default)."""
    vals = [r.detour_ratio for r in records if r.status == SERVED]
    if not vals:
        return default, True
    return float(np.mean(vals)), False


def _initial_positions(net, fleet_size, seed):
    rng = np.random.default_rng([int(seed), 0xF1EE7])
    stops = net.stops or net.nodes
    if not stops:
        return []
    by_zone = defaultdict(list)
    for s in stops:
        by_zone[net.zones.get(s, 0)].append(s)
    zones = sorted(by_zone)
    out = []
    for k in range(fleet_size):
        pool = by_zone[zones[k % len(zones)]]
        out.append(pool[int(rng.integers(len(pool)))])
    return out


class _Sim:
    def __init__(self, net, requests, fleet_size, periods, params):
        self.net = net
        self.params = params
        self.periods = tuple(periods)
        self.ctx = _Context(net, params, {r.rq_id: r for r in requests})
        self.events = []
        self.records = {}
        self.history = []  # (request_time, pickup_stop)
        self.vehicles = [Vehicle(k, params.capacity, node)
                         for k, node in enumerate(_initial_positions(net, fleet_size, params.seed))]
        for v in self.vehicles:
            self.log(0.0, v, "start", v.node)

    def log(self, t, v, kind, node, rq=-1):
        self.events.append(Event(float(t), v.vehicle_id, kind, int(node), int(rq)))

    def period_of(self, t):
        for name, start, end in self.periods:
            if start <= t < end:
                return name
        return None

    def timed_path(self, a, b, t0):
        nodes = self.net.path(a, b)
        out = []
        t = t0
        for u, w in zip(nodes, nodes[1:]):
            t += self.net.edge[(u, w)][0]
            out.append((w, t))
        return out

    def weights(self, now):
        lo = now - self.params.reposition_window_s
        times = [h[0] for h in self.history]
        start = bisect.bisect_left(times, lo)
        end = bisect.bisect_right(times, now)
        w = defaultdict(float)
        for _, stop in self.history[start:end]:
            w[stop] += 1.0
        return w

    def advance(self, v, t):
        while True:
            if v.route and v.route[0][1] <= t:
                node, arr = v.route.pop(0)
                v.odometer += self.net.edge[(v.node, node)][1]
                v.node, v.time = node, arr
                self.log(arr, v, "arrive", node)
                if not v.route and v.reposition_target == node:
                    v.reposition_target = None
                continue
            if not v.route and v.tasks and v.tasks[0].node == v.node:
                while v.tasks and v.tasks[0].node == v.node:
                    self.execute(v, v.tasks.pop(0))
                if v.tasks:
                    v.route = self.timed_path(v.node, v.tasks[0].node, v.time)
                else:
                    self.maybe_reposition(v)
                continue
            break

    def execute(self, v, task):
        req = self.ctx.requests[task.rq_id]
        if task.kind == "pickup":
            v.onboard[task.rq_id] = v.time
            self.log(v.time, v, "pickup", v.node, task.rq_id)
            return
        t_pick = v.onboard.pop(task.rq_id)
        self.log(v.time, v, "dropoff", v.node, task.rq_id)
        direct = self.ctx.direct_time(task.rq_id)
        ivtt = v.time - t_pick
        self.records[task.rq_id] = ServiceRecord(
            task.rq_id, SERVED, (t_pick - req.request_time) / 60.0, ivtt / 60.0, direct / 60.0,
            ivtt / direct, traveler_id=req.traveler_id, period=self.period_of(req.request_time),
            vehicle_id=v.vehicle_id, distance_mi=req.distance_mi)

    def maybe_reposition(self, v):
        if not self.params.reposition or self.period_of(v.time) is None:
            return
        target = reposition_vehicle(v, self.weights(v.time), self.net, self.params.reposition_scale_s)
        if target != v.node:
            v.reposition_target = target
            v.route = self.timed_path(v.node, target, v.time)
            self.log(v.time, v, "reposition", target)

    def reject(self, req, reason):
        self.records[req.rq_id] = ServiceRecord(
            req.rq_id, REJECTED, reason=reason, traveler_id=req.traveler_id,
            period=self.period_of(req.request_time), distance_mi=req.distance_mi)

    def handle(self, req):
        t = req.request_time
        for v in self.vehicles:
            self.advance(v, t)
        self.history.append((t, req.pickup_stop))
        if self.period_of(t) is None:
            self.reject(req, "outside_period")
            return
        best, best_v = None, None
        for v in self.vehicles:
            ins = insertion_cost(v, req, self.params, self.net, t, self.ctx)
            if ins.feasible and (best is None or ins.cost < best.cost):
                best, best_v = ins, v
        if best is None:
            self.reject(req, "no_feasible_vehicle" if self.vehicles else "no_vehicles")
            return
        self.assign(best_v, best, t)

    def assign(self, v, ins, now):
        v.tasks = list(ins.tasks)
        v.reposition_target = None
        first = v.tasks[0].node
        if v.route:
            a_node, a_time = v.route[0]
            v.route = [v.route[0]] + (self.timed_path(a_node, first, a_time) if a_node != first else [])
        else:
            v.time = max(v.time, now)
            v.route = self.timed_path(v.node, first, v.time) if v.node != first else []
        self.advance(v, now)

    def run(self, requests):
        for req in requests:
            self.handle(req)
        for v in self.vehicles:
            self.advance(v, math.inf)
        return [self.records[r.rq_id] for r in requests]


def _mean(vals):
    return float(np.mean(vals)) if vals else None


def simulate_fleet(micro_net, requests, fleet_size, operating_periods, params=None):
    """Run one day of microtransit service.

    ``operating_periods`` is a sequence of (name, start_s, end_s). Returns a
    FleetRun of (records in request order, FleetStats, event log).
    """
    params = params or FleetParams()
    if fleet_size < 0:
        raise ValueError("fleet_size must be >= 0")
    requests = sorted(requests, key=lambda r: (r.request_time, r.rq_id))
    sim = _Sim(micro_net, requests, fleet_size, operating_periods, params)
    records = sim.run(requests)
    served = [r for r in records if r.status == SERVED]
    by_period = {}
    for name, _, _ in operating_periods:
        recs = [r for r in records if r.period == name]
        ok = [r for r in recs if r.status == SERVED]
        by_period[name] = PeriodStats(_mean([r.wait_time for r in ok]),
                                      _mean([r.detour_ratio for r in ok]),
                                      len(ok), len(recs) - len(ok))
    stats = FleetStats(
        mean_wait=_mean([r.wait_time for r in served]),
        mean_detour_ratio=_mean([r.detour_ratio for r in served]),
        vmt=float(sum(v.odometer for v in sim.vehicles)),
        served=len(served),
        rejected=len(records) - len(served),
        by_period=by_period,
    )
    events = sorted(enumerate(sim.events), key=lambda ie: (ie[1].time_s, ie[1].vehicle_id, ie[0]))
    return FleetRun(records, stats, [e for _, e in events])


def write_event_log(events, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "vehicle_id", "event", "node_id", "rq_id"])
        for e in events:
            w.writerow([f"{e.time_s:g}", e.vehicle_id, e.event, e.node_id, e.rq_id])
