"""Least generalized cost routing for individual travelers.

Transit search runs on the supernetwork with a two-state label per node:
whether the path has already boarded FRT. The first FRT boarding pays the
flat fare; any later boarding (or a transfer link) pays the transfer
penalty instead. Micro rides accrue a per-mile fare.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

from fixflex.network import LinkType

WALK, FRT_RIDE, FRT_WAIT, FRT_TRANSFER, MICRO_RIDE, MICRO_WAIT = range(6)


@dataclass(frozen=True)
class Fares:
    frt_flat: float = 2.5
    micro_per_mile: float = 1.97
    auto_fuel_per_mile: float = 0.35

    @classmethod
    def from_params(cls, params):
        return cls(params.frt_fare, params.micro_fare_per_mile, params.auto_fuel_per_mile)


@dataclass(frozen=True)
class GeneralizedCostWeights:
    walk: float
    frt_ride: float
    frt_wait: float
    frt_transfer: float
    micro_ride: float
    micro_wait: float
    fare: float

    @classmethod
    def from_betas(cls, b):
        return cls(b.t_wk, b.f_ivt, b.f_wt, b.f_trfr, b.m_ivt, b.m_wt, b.t_fr)


@dataclass(frozen=True)
class ModalPathAttributes:
    walk_time: float = 0.0    # min
    micro_wait: float = 0.0   # min
    frt_wait: float = 0.0     # min
    micro_ivtt: float = 0.0   # min
    frt_ivtt: float = 0.0     # min
    fare: float = 0.0         # $
    transfers: int = 0
    micro_distance: float = 0.0  # mi
    legs: tuple = ()          # ((link_type, (from, to)), ...) runs of one link type
    links: tuple = ()         # Link objects along the path
    cost: float = 0.0         # generalized cost the search minimized

    @property
    def uses_micro(self):
        return self.micro_distance > 0 or any(t == LinkType.MICRO_RIDE for t, _ in self.legs)

    @property
    def uses_frt(self):
        return any(t == LinkType.FRT_RIDE for t, _ in self.legs)

    def to_json(self):
        return json.dumps([{"type": LinkType(t).name, "from": a, "to": b} for t, (a, b) in self.legs])


@dataclass(frozen=True)
class AutoPathAttributes:
    auto_ivtt: float = 0.0   # min
    gas_cost: float = 0.0    # $
    distance: float = 0.0    # mi
    nodes: tuple = ()
    cost: float = 0.0


def _link_cost(w, ltype, minutes, length, boarding, boarded, fares):
    """(cost, new boarded flag) for traversing one link."""
    if ltype == WALK:
        return w.walk * minutes, boarded
    if ltype == FRT_RIDE:
        return w.frt_ride * minutes, boarded
    if ltype == FRT_WAIT:
        if not boarding:
            return w.frt_wait * minutes, boarded
        extra = w.frt_transfer if boarded else w.fare * fares.frt_flat
        return w.frt_wait * minutes + extra, True
    if ltype == FRT_TRANSFER:
        return w.frt_wait * minutes + w.frt_transfer, True
    if ltype == MICRO_RIDE:
        return w.micro_ride * minutes + w.fare * fares.micro_per_mile * length, boarded
    return w.micro_wait * minutes, boarded


def micro_available(supernet, dp_time):
    return supernet.micro_enabled and supernet.period_of(dp_time) is not None


def least_cost_transit_path(supernet, traveler, fares=None):
    """Traveler-specific least generalized cost path, or None if unreachable."""
    fares = fares or Fares()
    o, d = traveler.origin, traveler.destination
    if supernet.layer_index.get(o) != "walk" or supernet.layer_index.get(d) != "walk":
        raise ValueError(f"origin/destination {o}->{d} are not walk-layer nodes")
    period = supernet.period_of(traveler.dp_time) if supernet.micro_enabled else None
    adj = supernet.adjacency(period, micro=period is not None)
    w = GeneralizedCostWeights.from_betas(traveler.betas)

    # labels keyed by (node, boarded)
    start = (o, False)
    best = {start: 0.0}
    pred = {}
    heap = [(0.0, o, 0)]
    done = set()
    goal = None
    while heap:
        c, u, flag = heapq.heappop(heap)
        state = (u, bool(flag))
        if state in done:
            continue
        done.add(state)
        if u == d:
            goal = state
            break
        for to, ltype, minutes, length, boarding, idx in adj.get(u, ()):
            lc, nflag = _link_cost(w, ltype, minutes, length, boarding, state[1], fares)
            nstate = (to, nflag)
            if nstate in done:
                continue
            nc = c + lc
            if nc < best.get(nstate, math.inf):
                best[nstate] = nc
                pred[nstate] = (state, idx)
                heapq.heappush(heap, (nc, to, int(nflag)))
    if goal is None:
        return None
    idxs = []
    s = goal
    while s != start:
        s, idx = pred[s]
        idxs.append(idx)
    idxs.reverse()
    path = [supernet.links[i] for i in idxs]
    times = [supernet.link_time(l, period) for l in path]
    attrs = decompose_path(path, fares, times)
    return _with_cost(attrs, best[goal])


def _with_cost(attrs, cost):
    from dataclasses import replace
    return replace(attrs, cost=cost)


def decompose_path(path, fares=None, times=None):
    """Sum link attributes by type into the transit utility attributes.

    ``times`` optionally gives each link's effective travel time (s) when it
    differs from the stored one (period-specific micro attributes).
    """
    fares = fares or Fares()
    if times is None:
        times = [l.travel_time for l in path]
    acc = dict(walk=0.0, mw=0.0, fw=0.0, mivt=0.0, fivt=0.0, mdist=0.0)
    transfers = 0
    boarded = False
    legs = []
    for link, t in zip(path, times):
        minutes = t / 60.0
        lt = link.link_type
        if lt == LinkType.WALK:
            acc["walk"] += minutes
        elif lt == LinkType.FRT_RIDE:
            acc["fivt"] += minutes
        elif lt == LinkType.FRT_WAIT:
            acc["fw"] += minutes
            if link.boarding:
                if boarded:
                    transfers += 1
                boarded = True
        elif lt == LinkType.FRT_TRANSFER:
            acc["fw"] += minutes
            transfers += 1
        elif lt == LinkType.MICRO_RIDE:
            acc["mivt"] += minutes
            acc["mdist"] += link.length
        elif lt == LinkType.MICRO_WAIT:
            acc["mw"] += minutes
        if legs and legs[-1][0] == lt:
            legs[-1] = (lt, (legs[-1][1][0], link.to_node))
        else:
            legs.append((lt, (link.from_node, link.to_node)))
    fare = (fares.frt_flat if boarded else 0.0) + fares.micro_per_mile * acc["mdist"]
    return ModalPathAttributes(
        walk_time=acc["walk"], micro_wait=acc["mw"], frt_wait=acc["fw"], micro_ivtt=acc["mivt"],
        frt_ivtt=acc["fivt"], fare=fare, transfers=transfers, micro_distance=acc["mdist"],
        legs=tuple((LinkType(t), span) for t, span in legs), links=tuple(path))


def generalized_cost(attrs, betas):
    """Weighted attribute sum; equals the search cost of the same path."""
    return (betas.t_wk * attrs.walk_time + betas.m_wt * attrs.micro_wait
            + betas.f_wt * attrs.frt_wait + betas.m_ivt * attrs.micro_ivtt
            + betas.f_ivt * attrs.frt_ivtt + betas.t_fr * attrs.fare
            + betas.f_trfr * attrs.transfers)


def least_cost_auto_path(auto_net, traveler, fares=None, adjacency=None):
    fares = fares or Fares()
    b = traveler.betas
    adj = adjacency if adjacency is not None else auto_net.successors()
    o, d = traveler.origin, traveler.destination
    if o not in auto_net.nodes or d not in auto_net.nodes:
        raise ValueError(f"origin/destination {o}->{d} not in the auto network")
    best = {o: 0.0}
    pred = {}
    heap = [(0.0, o)]
    done = set()
    while heap:
        c, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == d:
            break
        for e in adj.get(u, ()):
            if e.to_node in done:
                continue
            nc = c + b.d_ivt * e.travel_time / 60.0 + b.d_gas * fares.auto_fuel_per_mile * e.length
            if nc < best.get(e.to_node, math.inf):
                best[e.to_node] = nc
                pred[e.to_node] = e
                heapq.heappush(heap, (nc, e.to_node))
    if d not in done:
        return None
    edges = []
    n = d
    while n != o:
        e = pred[n]
        edges.append(e)
        n = e.from_node
    edges.reverse()
    t = sum(e.travel_time for e in edges)
    dist = sum(e.length for e in edges)
    return AutoPathAttributes(t / 60.0, dist * fares.auto_fuel_per_mile, dist,
                              (o,) + tuple(e.to_node for e in edges), best[d])


@dataclass
class ShortestPathTree:
    """Single-source shortest paths on a plain weighted digraph."""
    source: int
    dist: dict = field(default_factory=dict)
    pred: dict = field(default_factory=dict)

    def path_to(self, target):
        if target not in self.dist:
            return None
        nodes = [target]
        while nodes[-1] != self.source:
            nodes.append(self.pred[nodes[-1]])
        nodes.reverse()
        return nodes


def shortest_path_tree(adj, source, weight=lambda e: e[1], bound=math.inf):
    """Dijkstra from ``source`` over adj[u] = [(v, w, ...), ...].

    Labels above ``bound`` are not expanded. Ties settle the lowest node id
    first.
    """
    tree = ShortestPathTree(source, {source: 0}, {})
    heap = [(0, source)]
    done = set()
    while heap:
        c, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for e in adj.get(u, ()):
            v = e[0]
            if v in done:
                continue
            nc = c + weight(e)
            if nc <= bound and nc < tree.dist.get(v, math.inf):
                tree.dist[v] = nc
                tree.pred[v] = u
                heapq.heappush(heap, (nc, v))
    return tree
