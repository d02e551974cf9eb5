"""Fixed-point iteration between mode choice and microtransit performance.

Each iteration routes every traveler on the current supernetwork and the
auto network, applies the threshold-gated logit assignment, sends the
microtransit legs of transit choosers to the fleet simulator, and feeds
the resulting waits and detour ratios back into the micro layer.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from fixflex.choice import Mode, ModeChoiceState, assign_mode, auto_utility, choice_probability, \
    transit_utility
from fixflex.demand import traveler_rng
from fixflex.fleet import FleetNetwork, FleetParams, RideRequest, simulate_fleet
from fixflex.network import LinkType, MicroState, apply_zonal_partition, build_supernetwork, \
    with_micro_state
from fixflex.router import Fares, least_cost_auto_path, least_cost_transit_path

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-9


class Networks(NamedTuple):
    auto: object
    walk: object
    frt_lines: list


@dataclass
class TravelerOutcome:
    rq_id: int
    mode: Mode
    prob_transit: float
    transit: object  # ModalPathAttributes or None
    auto: object     # AutoPathAttributes or None
    dp_time: float = 0.0


@dataclass
class IterationRecord:
    iteration: int
    convergence_gap: float  # inf on the first iteration
    transit_count: int
    auto_count: int
    fleet_stats: object
    probs: np.ndarray
    micro_requests: int = 0
    flags: tuple = ()

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "gap": None if math.isinf(self.convergence_gap) else self.convergence_gap,
            "transit_count": self.transit_count,
            "auto_count": self.auto_count,
            "expected_transit": float(self.probs.sum()),
            "micro_requests": self.micro_requests,
            "fleet": self.fleet_stats.to_dict() if self.fleet_stats else None,
            "flags": list(self.flags),
        }


@dataclass
class EquilibriumResult:
    converged: bool
    iterations: list
    outcomes: list
    supernet: object
    fleet_run: object = None
    requests: list = field(default_factory=list)
    scenario: object = None

    @property
    def final_gap(self):
        return self.iterations[-1].convergence_gap


def convergence_gap(probs_n, probs_prev):
    """Sum over travelers and both modes of (change)^2 / previous probability."""
    pn = np.clip(np.asarray(probs_n, dtype=float), PROB_FLOOR, 1 - PROB_FLOOR)
    pp = np.asarray(probs_prev, dtype=float)
    if pn.shape != pp.shape:
        raise ValueError("probability vectors differ in length")
    pp = np.clip(pp, PROB_FLOOR, 1 - PROB_FLOOR)
    if np.any(pp <= 0):
        raise ValueError("previous probabilities must be positive")
    dt = pn - pp
    return float(np.sum(dt * dt / pp) + np.sum(dt * dt / (1.0 - pp)))


def extract_requests(outcomes, supernet, start_id=0):
    """One ride request per contiguous micro leg of each transit chooser."""
    reqs = []
    for out in outcomes:
        if out.mode is not Mode.TRANSIT or out.transit is None or not out.transit.uses_micro:
            continue
        period = supernet.period_of(out.dp_time)
        clock = out.dp_time
        walk_before = 0.0
        leg = 0
        pickup = None
        dist = 0.0
        for link in out.transit.links:
            t = supernet.link_time(link, period)
            if link.link_type == LinkType.MICRO_WAIT and link.boarding:
                pickup = (clock, link.to_node - supernet.micro_offset, walk_before)
                dist = 0.0
            elif link.link_type == LinkType.MICRO_RIDE:
                dist += link.length
            elif link.link_type == LinkType.MICRO_WAIT and pickup is not None:
                req_time, stop, access = pickup
                reqs.append((req_time, out.rq_id, leg, stop, link.from_node - supernet.micro_offset,
                             access, dist))
                leg += 1
                pickup = None
                walk_before = 0.0
            elif link.link_type == LinkType.WALK:
                walk_before += t / 60.0
            clock += t
    reqs.sort(key=lambda r: (r[0], r[1], r[2]))
    return [RideRequest(start_id + k, float(rt), a, b, acc, 0.0, tid, leg, dist)
            for k, (rt, tid, leg, a, b, acc, dist) in enumerate(reqs)]


def _state_from(stats_wait, stats_detour, rejection_rate, served, params, prev=None, step=1.0):
    flags = []
    factor = min(1.0 / (1.0 - rejection_rate), params.rejection_wait_cap) \
        if rejection_rate < 1 else params.rejection_wait_cap
    if served == 0 or stats_wait is None:
        wait_s = params.cold_start_wait_s * factor
        detour = params.cold_start_detour
        flags.append("cold_start")
    else:
        wait_s = stats_wait * 60.0 * factor
        detour = max(1.0, stats_detour)
    if prev is not None and step < 1:
        wait_s = prev.wait_s + step * (wait_s - prev.wait_s)
        detour = prev.detour + step * (detour - prev.detour)
    return MicroState(wait_s, detour), flags


def averaging_step(params, n):
    """Weight of the n-th fleet observation when blending micro attributes."""
    if params.averaging == "msa":
        return 1.0 / n
    return 1.0 - params.damping


def update_supernetwork_from_fleet(supernet, stats, params, step=1.0):
    """Broadcast fleet waits and detour ratios onto the micro layer.

    ``step`` < 1 blends the observation with the current attributes.
    """
    if not supernet.micro_enabled:
        return supernet, []
    overall, flags = _state_from(stats.mean_wait, stats.mean_detour_ratio, stats.rejection_rate,
                                 stats.served, params, supernet.micro_state, step)
    per_period = {}
    if params.per_period_update:
        for name, ps in stats.by_period.items():
            total = ps.served + ps.rejected
            r = ps.rejected / total if total else 0.0
            st, f = _state_from(ps.mean_wait, ps.mean_detour_ratio, r, ps.served, params,
                                supernet.period_state.get(name, supernet.micro_state), step)
            per_period[name] = st
            flags += [f"{name}:{x}" for x in f]
    return with_micro_state(supernet, overall, per_period), flags


class _Router:
    def __init__(self, networks, fares):
        self.networks = networks
        self.fares = fares
        self.auto_adj = networks.auto.successors()
        self.auto_cache = {}

    def auto(self, traveler):
        if traveler.rq_id not in self.auto_cache:
            self.auto_cache[traveler.rq_id] = least_cost_auto_path(
                self.networks.auto, traveler, self.fares, self.auto_adj)
        return self.auto_cache[traveler.rq_id]


def route_and_price(supernet, demand, router):
    """Paths and transit probabilities for every traveler on a fixed network."""
    paths = []
    probs = np.empty(len(demand))
    for k, trav in enumerate(demand):
        tp = least_cost_transit_path(supernet, trav, router.fares)
        ap = router.auto(trav)
        probs[k] = choice_probability(transit_utility(tp, trav.betas), auto_utility(ap, trav.betas))
        paths.append((tp, ap))
    return paths, probs


def initial_supernetwork(scenario, networks, zone_map=None):
    p = scenario.params
    sn = build_supernetwork(networks.walk, networks.auto, networks.frt_lines, scenario,
                            p.cold_start_detour, p.cold_start_wait_s, p)
    if scenario.partition is not None or zone_map is not None:
        if zone_map is None:
            raise ValueError("partitioned scenario needs a zone map")
        sn = apply_zonal_partition(sn, zone_map)
    return sn


def run_equilibrium(scenario, demand, networks, params=None, zone_map=None, iteration_log=None):
    """Iterate route -> choose -> simulate -> update until the gap is <= epsilon.

    ``zone_map`` partitions the micro layer. ``iteration_log`` is an optional
    open text file receiving one JSON line per iteration.
    """
    params = params or scenario.params
    fares = Fares.from_params(params)
    supernet = initial_supernetwork(scenario, networks, zone_map)
    fleet_net = FleetNetwork.from_supernetwork(supernet) if supernet.micro_enabled else None
    fleet_params = FleetParams.from_params(params, seed=scenario.master_seed)
    router = _Router(networks, fares)
    states = [ModeChoiceState(t.rq_id) for t in demand]
    rngs = [traveler_rng(t) for t in demand]
    records = []
    prev_probs = None
    converged = False
    fleet_run = None
    requests = []
    outcomes = []
    for n in range(1, params.max_iterations + 1):
        paths, probs = route_and_price(supernet, demand, router)
        for st, rng, p in zip(states, rngs, probs):
            assign_mode(st, float(p), params.eta, rng)
        outcomes = [TravelerOutcome(t.rq_id, st.chosen_mode, float(p), tp, ap, t.dp_time)
                    for t, st, p, (tp, ap) in zip(demand, states, probs, paths)]
        requests = extract_requests(outcomes, supernet)
        flags = []
        stats = None
        if fleet_net is not None:
            fleet_run = simulate_fleet(fleet_net, requests, scenario.fleet_size,
                                       supernet.operating_periods, fleet_params)
            stats = fleet_run.stats
            supernet, flags = update_supernetwork_from_fleet(supernet, stats, params,
                                                             averaging_step(params, n))
        gap = math.inf if prev_probs is None else convergence_gap(probs, prev_probs)
        n_transit = sum(1 for o in outcomes if o.mode is Mode.TRANSIT)
        rec = IterationRecord(n, gap, n_transit, len(demand) - n_transit, stats, probs,
                              len(requests), tuple(flags))
        records.append(rec)
        log.info("scenario %s iteration %d gap %s transit %d micro requests %d",
                 scenario.scenario_id, n, gap, n_transit, len(requests))
        if iteration_log is not None:
            iteration_log.write(json.dumps(rec.to_dict()) + "\n")
        prev_probs = probs
        if gap <= params.epsilon:
            converged = True
            break
    return EquilibriumResult(converged, records, outcomes, supernet, fleet_run, requests, scenario)


def frozen_repass_gap(result, demand, networks, params=None):
    """Gap between the final probabilities and one more pass on the final network."""
    params = params or result.scenario.params
    router = _Router(networks, Fares.from_params(params))
    _, probs = route_and_price(result.supernet, demand, router)
    return convergence_gap(probs, result.iterations[-1].probs)
