"""Street networks, FRT lines and the three-layer transit supernetwork.

Layers share the street topology: the walk layer uses street node ids
directly, the microtransit layer offsets them by ``micro_offset``, and FRT
stop nodes (one per route, direction and stop position) are numbered from
``frt_offset`` upwards.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from fixflex.errors import ConfigError, ParseError, ValidationError


class LinkType(IntEnum):
    WALK = 0
    FRT_RIDE = 1
    FRT_WAIT = 2
    FRT_TRANSFER = 3
    MICRO_RIDE = 4
    MICRO_WAIT = 5


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    zone_id: int = 0
    jobs: float = 0.0


@dataclass(frozen=True)
class Link:
    from_node: int
    to_node: int
    length: float  # miles
    travel_time: float  # seconds
    link_type: LinkType
    route_id: str | None = None
    boarding: bool = False  # wait links only: walk -> service direction
    base_time: float = 0.0  # micro rides: unscaled auto time


@dataclass(frozen=True)
class Edge:
    from_node: int
    to_node: int
    length: float
    travel_time: float


@dataclass(frozen=True)
class RoadNetwork:
    nodes: dict
    edges: tuple

    def successors(self):
        adj = defaultdict(list)
        for e in self.edges:
            adj[e.from_node].append(e)
        return adj


@dataclass(frozen=True)
class FrtLine:
    route_id: str
    headway_min: float
    duration_min: float
    length_mi: float
    operating_hr: float
    stops: dict  # direction -> tuple of street node ids

    def __post_init__(self):
        for name in ("headway_min", "duration_min", "length_mi", "operating_hr"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"line {self.route_id}: {name} must be positive")


@dataclass(frozen=True)
class MicroState:
    wait_s: float
    detour: float


@dataclass(frozen=True)
class Supernetwork:
    nodes: dict
    links: tuple
    layer_index: dict
    frt_lines: tuple
    operating_periods: tuple  # (name, start_s, end_s)
    virtual_stops: frozenset  # micro-layer node ids
    micro_offset: int
    frt_offset: int
    micro_enabled: bool
    micro_state: MicroState
    period_state: dict = field(default_factory=dict)  # period name -> MicroState
    frt_stop_street: dict = field(default_factory=dict)  # FRT node -> street node
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def micro_node(self, street_id):
        return street_id + self.micro_offset

    def street_node(self, node_id):
        layer = self.layer_index[node_id]
        if layer == "walk":
            return node_id
        if layer == "micro":
            return node_id - self.micro_offset
        return self.frt_stop_street[node_id]

    def walk_nodes(self):
        return sorted(n for n, layer in self.layer_index.items() if layer == "walk")

    def period_of(self, t):
        """Name of the operating period containing clock time t (s), or None."""
        for name, start, end in self.operating_periods:
            if start <= t < end:
                return name
        return None

    def state_for(self, period):
        if period is not None and period in self.period_state:
            return self.period_state[period]
        return self.micro_state

    def link_time(self, link, period=None):
        if link.link_type == LinkType.MICRO_RIDE:
            return link.base_time * self.state_for(period).detour
        if link.link_type == LinkType.MICRO_WAIT and link.boarding:
            return self.state_for(period).wait_s
        return link.travel_time

    def adjacency(self, period=None, micro=True):
        """Compiled out-links per node for one period.

        Entries are (to, link_type, minutes, length, boarding, link index).
        Micro links are dropped when ``micro`` is false.
        """
        key = (period, micro)
        if key not in self._cache:
            adj = defaultdict(list)
            for idx, link in enumerate(self.links):
                is_micro = link.link_type in (LinkType.MICRO_RIDE, LinkType.MICRO_WAIT)
                if is_micro and not micro:
                    continue
                t = self.link_time(link, period)
                adj[link.from_node].append(
                    (link.to_node, int(link.link_type), t / 60.0, link.length, link.boarding, idx))
            for lst in adj.values():
                lst.sort(key=lambda e: (e[0], e[1], e[5]))
            self._cache[key] = dict(adj)
        return self._cache[key]

    def links_of_type(self, *types):
        return [l for l in self.links if l.link_type in types]

    def fingerprint(self):
        """Stable text form, used to check rebuilds are identical."""
        lines = [f"{n.id},{n.x!r},{n.y!r},{n.zone_id},{n.jobs!r},{self.layer_index[n.id]}"
                 for n in sorted(self.nodes.values(), key=lambda n: n.id)]
        lines += [f"{l.from_node},{l.to_node},{l.length!r},{l.travel_time!r},{int(l.link_type)},"
                  f"{l.route_id},{int(l.boarding)},{l.base_time!r}" for l in self.links]
        lines.append("vs:" + ",".join(map(str, sorted(self.virtual_stops))))
        lines.append(f"state:{self.micro_state}")
        lines += [f"period:{k}:{v}" for k, v in sorted(self.period_state.items())]
        return "\n".join(lines)


# ---------------------------------------------------------------- file input

def _read_rows(path, required):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing and header:
            raise ParseError(path, 1, f"missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def _num(path, lineno, row, key, cast=float):
    raw = row.get(key)
    if raw is None or str(raw).strip() == "":
        raise ParseError(path, lineno, f"empty {key}")
    try:
        return cast(raw) if cast is not int else int(float(raw))
    except ValueError:
        raise ParseError(path, lineno, f"bad {key} value {raw!r}") from None


def load_nodes(path):
    nodes = {}
    for lineno, row in _read_rows(path, ["node_id", "x", "y", "jobs"]):
        nid = _num(path, lineno, row, "node_id", int)
        jobs = _num(path, lineno, row, "jobs")
        if jobs < 0:
            raise ValidationError(f"{path}:{lineno}: negative jobs at node {nid}")
        if nid in nodes:
            raise ValidationError(f"{path}:{lineno}: duplicate node id {nid}")
        nodes[nid] = Node(nid, _num(path, lineno, row, "x"), _num(path, lineno, row, "y"), 0, jobs)
    return nodes


def load_edges(path, nodes):
    edges = []
    for lineno, row in _read_rows(path, ["from", "to", "length_mi", "auto_time_s"]):
        a = _num(path, lineno, row, "from", int)
        b = _num(path, lineno, row, "to", int)
        length = _num(path, lineno, row, "length_mi")
        t = _num(path, lineno, row, "auto_time_s")
        for nid in (a, b):
            if nid not in nodes:
                raise ValidationError(f"{path}:{lineno}: link references unknown node {nid}")
        if length < 0 or t < 0:
            raise ValidationError(f"{path}:{lineno}: negative length or time")
        edges.append(Edge(a, b, length, t))
    return edges


def load_frt_lines(path, nodes, default_operating_hr=19.0):
    """Read the line file; one row per (route, direction, stop position)."""
    per_route = {}
    stops = defaultdict(lambda: defaultdict(list))
    for lineno, row in _read_rows(path, ["route_id", "direction", "stop_seq", "node_id",
                                         "headway_min", "duration_min", "length_mi",
                                         "operating_hr"]):
        rid = (row.get("route_id") or "").strip()
        if not rid:
            raise ParseError(path, lineno, "empty route_id")
        direction = (row.get("direction") or "").strip()
        seq = _num(path, lineno, row, "stop_seq", int)
        nid = _num(path, lineno, row, "node_id", int)
        if nid not in nodes:
            raise ValidationError(f"{path}:{lineno}: stop references unknown node {nid}")
        op = row.get("operating_hr")
        attrs = (
            _num(path, lineno, row, "headway_min"),
            _num(path, lineno, row, "duration_min"),
            _num(path, lineno, row, "length_mi"),
            float(op) if op is not None and str(op).strip() else default_operating_hr,
        )
        if rid in per_route and per_route[rid] != attrs:
            raise ValidationError(f"{path}:{lineno}: inconsistent attributes for route {rid}")
        per_route[rid] = attrs
        stops[rid][direction].append((seq, nid))
    lines = []
    for rid in sorted(per_route):
        h, d, length, op = per_route[rid]
        dirs = {}
        for direction, seq_nodes in sorted(stops[rid].items()):
            seq_nodes.sort()
            if len({s for s, _ in seq_nodes}) != len(seq_nodes):
                raise ValidationError(f"{path}: route {rid} direction {direction} repeats a stop_seq")
            dirs[direction] = tuple(n for _, n in seq_nodes)
        lines.append(FrtLine(rid, h, d, length, op, dirs))
    return lines


def load_networks(street_file, frt_file, land_use_file, walk_speed_mph=2.8,
                  default_operating_hr=19.0):
    """Read street links, FRT lines and node land use.

    Returns (auto network, walk network, list of FrtLine). Street rows are
    directed links; the walk network reuses them at walking speed.
    """
    nodes = load_nodes(land_use_file)
    edges = load_edges(street_file, nodes)
    frt = load_frt_lines(frt_file, nodes, default_operating_hr) if frt_file else []
    auto = RoadNetwork(nodes, tuple(edges))
    walk = RoadNetwork(nodes, tuple(
        Edge(e.from_node, e.to_node, e.length, e.length / walk_speed_mph * 3600.0) for e in edges))
    return auto, walk, frt


def load_zone_map(path):
    zones = {}
    for lineno, row in _read_rows(path, ["node_id", "zone_id"]):
        zones[_num(path, lineno, row, "node_id", int)] = _num(path, lineno, row, "zone_id", int)
    return zones


def write_network_files(directory, nodes, edges, frt_lines=(), zone_map=None):
    """Inverse of the loaders, used by the synthetic city generator."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "nodes.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "x", "y", "jobs"])
        for n in sorted(nodes.values(), key=lambda n: n.id):
            w.writerow([n.id, f"{n.x:g}", f"{n.y:g}", f"{n.jobs:g}"])
    with (directory / "links.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "length_mi", "auto_time_s"])
        for e in edges:
            w.writerow([e.from_node, e.to_node, f"{e.length:g}", f"{e.travel_time:g}"])
    with (directory / "frt_lines.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["route_id", "direction", "stop_seq", "node_id", "headway_min",
                    "duration_min", "length_mi", "operating_hr"])
        for line in frt_lines:
            for direction, seq in sorted(line.stops.items()):
                for k, nid in enumerate(seq):
                    w.writerow([line.route_id, direction, k, nid, f"{line.headway_min:g}",
                                f"{line.duration_min:g}", f"{line.length_mi:g}",
                                f"{line.operating_hr:g}"])
    if zone_map is not None:
        with (directory / "zones.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_id", "zone_id"])
            for nid in sorted(zone_map):
                w.writerow([nid, zone_map[nid]])


# ------------------------------------------------------- supernetwork build

def _street_lengths(road):
    """All-pairs street distances (miles) by Dijkstra on length."""
    import heapq

    adj = road.successors()
    cache = {}

    def from_source(s):
        if s not in cache:
            dist = {s: 0.0}
            heap = [(0.0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                for e in adj.get(u, ()):
                    nd = d + e.length
                    if nd < dist.get(e.to_node, math.inf):
                        dist[e.to_node] = nd
                        heapq.heappush(heap, (nd, e.to_node))
            cache[s] = dist
        return cache[s]

    return from_source


def sample_virtual_stops(street_ids, coverage, seed):
    """Deterministic uniform sample of ceil(coverage * n) street nodes."""
    if not 0 <= coverage <= 1:
        raise ConfigError(f"virtual stop coverage {coverage} outside [0, 1]")
    ids = sorted(street_ids)
    k = math.ceil(round(coverage * len(ids), 9))
    if k >= len(ids):
        return ids
    rng = np.random.default_rng([int(seed), 0x5715])
    picked = rng.choice(len(ids), size=k, replace=False)
    return sorted(ids[i] for i in picked)


def _layer_offset(max_id):
    return 10 ** max(1, len(str(max_id + 1)))


def build_supernetwork(walk_net, auto_net, frt_lines, scenario, detour_ratio, mean_wait,
                       params=None):
    """Assemble walk, FRT and micro layers with their connecting links.

    ``mean_wait`` is in seconds. Scenario headway replaces each line's own
    headway; micro links exist only when the scenario runs microtransit.
    """
    params = params or scenario.params
    if detour_ratio < 1:
        raise ValidationError("detour_ratio must be >= 1")
    if mean_wait < 0:
        raise ValidationError("mean_wait must be >= 0")
    if not 0 <= scenario.virtual_stop_coverage <= 1:
        raise ConfigError("virtual stop coverage outside [0, 1]")
    street = walk_net.nodes
    max_id = max(street) if street else 0
    micro_offset = _layer_offset(max_id)
    frt_offset = 2 * micro_offset

    nodes = {}
    layer = {}
    links = []
    for nid, n in street.items():
        nodes[nid] = n
        layer[nid] = "walk"
    for e in walk_net.edges:
        links.append(Link(e.from_node, e.to_node, e.length, e.travel_time, LinkType.WALK))

    # FRT layer
    lines = tuple(replace(l, headway_min=float(scenario.headway_min)) for l in frt_lines) \
        if scenario.frt_enabled else ()
    frt_stop_street = {}
    frt_nodes_by_route = defaultdict(list)  # route -> [(frt node, street node)]
    next_id = frt_offset
    dist_from = _street_lengths(auto_net)
    for line in lines:
        wait_s = line.headway_min / 2.0 * 60.0
        for direction in sorted(line.stops):
            seq = line.stops[direction]
            ids = []
            for sid in seq:
                fid = next_id
                next_id += 1
                n = street[sid]
                nodes[fid] = Node(fid, n.x, n.y, n.zone_id, 0.0)
                layer[fid] = "frt"
                frt_stop_street[fid] = sid
                frt_nodes_by_route[line.route_id].append((fid, sid))
                ids.append(fid)
                links.append(Link(sid, fid, 0.0, wait_s, LinkType.FRT_WAIT, line.route_id, True))
                links.append(Link(fid, sid, 0.0, 0.0, LinkType.FRT_WAIT, line.route_id, False))
            seg = [dist_from(a).get(b, math.inf) for a, b in zip(seq, seq[1:])]
            if any(math.isinf(s) for s in seg):
                raise ValidationError(f"line {line.route_id}: consecutive stops not connected")
            total = sum(seg)
            shares = [s / total for s in seg] if total > 0 else [1.0 / len(seg)] * len(seg)
            for (fa, fb), share in zip(zip(ids, ids[1:]), shares):
                links.append(Link(fa, fb, line.length_mi * share, line.duration_min * 60.0 * share,
                                  LinkType.FRT_RIDE, line.route_id))
    headway_of = {l.route_id: l.headway_min for l in lines}
    routes = sorted(frt_nodes_by_route)
    for i, ra in enumerate(routes):
        for rb in routes:
            if ra == rb:
                continue
            for fa, sa in frt_nodes_by_route[ra]:
                for fb, sb in frt_nodes_by_route[rb]:
                    na, nb = street[sa], street[sb]
                    if math.hypot(na.x - nb.x, na.y - nb.y) <= params.transfer_radius:
                        t = params.transfer_penalty_s + headway_of[rb] / 2.0 * 60.0
                        links.append(Link(fa, fb, 0.0, t, LinkType.FRT_TRANSFER, rb))

    # micro layer
    micro = scenario.micro_enabled
    stops = frozenset()
    if micro:
        for nid, n in street.items():
            mid = nid + micro_offset
            nodes[mid] = Node(mid, n.x, n.y, n.zone_id, 0.0)
            layer[mid] = "micro"
        for e in auto_net.edges:
            links.append(Link(e.from_node + micro_offset, e.to_node + micro_offset, e.length,
                              e.travel_time * detour_ratio, LinkType.MICRO_RIDE,
                              base_time=e.travel_time))
        vs = sample_virtual_stops(street, scenario.virtual_stop_coverage, scenario.master_seed)
        stops = frozenset(s + micro_offset for s in vs)
        for s in vs:
            links.append(Link(s, s + micro_offset, 0.0, float(mean_wait), LinkType.MICRO_WAIT,
                              boarding=True))
            links.append(Link(s + micro_offset, s, 0.0, 0.0, LinkType.MICRO_WAIT))
    periods = scenario.period_windows() if micro else ()
    return Supernetwork(
        nodes=nodes,
        links=tuple(links),
        layer_index=layer,
        frt_lines=lines,
        operating_periods=periods,
        virtual_stops=stops,
        micro_offset=micro_offset,
        frt_offset=frt_offset,
        micro_enabled=micro,
        micro_state=MicroState(float(mean_wait), float(detour_ratio)),
        frt_stop_street=frt_stop_street,
    )


def with_micro_state(supernet, overall, per_period=None):
    """New supernetwork whose micro waits/ride times reflect ``overall``.

    ``per_period`` maps period name -> MicroState and overrides ``overall``
    for travelers departing in that period.
    """
    links = []
    for l in supernet.links:
        if l.link_type == LinkType.MICRO_RIDE:
            l = replace(l, travel_time=l.base_time * overall.detour)
        elif l.link_type == LinkType.MICRO_WAIT and l.boarding:
            l = replace(l, travel_time=overall.wait_s)
        links.append(l)
    return replace(supernet, links=tuple(links), micro_state=overall,
                   period_state=dict(per_period or {}), _cache={})


def apply_zonal_partition(supernet, zone_map):
    """Drop micro ride links whose endpoints fall in different zones."""
    street_ids = [n for n, layer in supernet.layer_index.items() if layer == "walk"]
    missing = [n for n in street_ids if n not in zone_map]
    if missing:
        raise ValidationError(f"zone map lacks node(s) {missing[:5]}")
    nodes = {}
    for nid, n in supernet.nodes.items():
        nodes[nid] = replace(n, zone_id=zone_map[supernet.street_node(nid)])
    links = tuple(
        l for l in supernet.links
        if not (l.link_type == LinkType.MICRO_RIDE
                and zone_map[l.from_node - supernet.micro_offset]
                != zone_map[l.to_node - supernet.micro_offset]))
    return replace(supernet, nodes=nodes, links=links, _cache={})
