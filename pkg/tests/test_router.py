import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import betas, line_network, random_betas, random_supernet, traveler
from oracles import exhaustive_transit_cost, path_cost
from fixflex.config import Params, ScenarioConfig
from fixflex.demand import TravelerProfile
from fixflex.network import FrtLine, LinkType, MicroState, build_supernetwork, with_micro_state
from fixflex.router import Fares, decompose_path, generalized_cost, least_cost_auto_path, \
    least_cost_transit_path, shortest_path_tree


def _frt_supernet(headway=15.0, radius=0.0):
    auto, walk = line_network(4)
    line = FrtLine("L", headway, 8.0, 1.5, 19.0, {"0": (0, 1, 2, 3), "1": (3, 2, 1, 0)})
    sc = ScenarioConfig("f", "FixedOnly", headway, 0.0, 0, (), params=Params(transfer_radius=radius))
    return build_supernetwork(walk, auto, [line], sc, 1.2, 300.0), auto


def test_walk_only_when_transit_unattractive():
    sn, _ = _frt_supernet()
    p = least_cost_transit_path(sn, traveler(0, 1, t_fr=100.0))
    assert not p.uses_frt and p.fare == 0
    assert p.walk_time == pytest.approx(0.5 / 2.8 * 60)


def test_frt_fare_charged_once():
    sn, _ = _frt_supernet()
    p = least_cost_transit_path(sn, traveler(0, 3, t_wk=1.0))
    assert p.uses_frt
    assert p.fare == pytest.approx(2.5)
    assert p.frt_wait == pytest.approx(7.5)  # h/2
    assert p.frt_ivtt == pytest.approx(8.0)
    assert p.transfers == 0


def test_path_cost_matches_generalized_cost():
    sn, _ = _frt_supernet()
    t = traveler(0, 3, t_wk=1.0)
    p = least_cost_transit_path(sn, t)
    assert p.cost == pytest.approx(generalized_cost(p, t.betas))
    assert p.cost == pytest.approx(path_cost(sn, p.links, t.betas, None))


def test_micro_only_in_operating_period():
    auto, walk = line_network(4)
    sc = ScenarioConfig("m", "MicroOnly", None, 1.0, 2, ("AM",))
    sn = build_supernetwork(walk, auto, [], sc, 1.0, 60.0)
    b = dict(t_wk=1.0, t_fr=0.01)
    inside = least_cost_transit_path(sn, traveler(0, 3, dp=6 * 3600, **b))
    outside = least_cost_transit_path(sn, traveler(0, 3, dp=12 * 3600, **b))
    assert inside.uses_micro and inside.micro_distance == pytest.approx(1.5)
    assert inside.fare == pytest.approx(1.97 * 1.5)
    assert not outside.uses_micro


def test_period_specific_micro_state_used():
    auto, walk = line_network(4)
    sc = ScenarioConfig("m", "MicroOnly", None, 1.0, 2, ("AM", "PM"))
    sn = build_supernetwork(walk, auto, [], sc, 1.0, 60.0)
    sn = with_micro_state(sn, MicroState(60.0, 1.0), {"PM": MicroState(600.0, 1.5)})
    b = dict(t_wk=1.0, t_fr=0.01)
    am = least_cost_transit_path(sn, traveler(0, 3, dp=6 * 3600, **b))
    pm = least_cost_transit_path(sn, traveler(0, 3, dp=16 * 3600, **b))
    assert am.micro_wait == pytest.approx(1.0)
    assert pm.micro_wait == pytest.approx(10.0)
    assert pm.micro_ivtt == pytest.approx(am.micro_ivtt * 1.5)


def test_unreachable_destination_returns_none():
    from fixflex.network import Edge, Node, RoadNetwork

    nodes = {0: Node(0, 0, 0), 1: Node(1, 1, 0), 2: Node(2, 2, 0)}
    edges = (Edge(0, 1, 1.0, 240.0), Edge(1, 0, 1.0, 240.0))
    net = RoadNetwork(nodes, edges)
    sc = ScenarioConfig("m", "MicroOnly", None, 1.0, 1, ("AM",))
    sn = build_supernetwork(net, net, [], sc, 1.0, 60.0)
    assert least_cost_transit_path(sn, traveler(0, 2)) is None
    assert least_cost_auto_path(net, traveler(0, 2)) is None


def test_non_walk_origin_rejected():
    sn, _ = _frt_supernet()
    frt_node = next(n for n, layer in sn.layer_index.items() if layer == "frt")
    with pytest.raises(ValueError):
        least_cost_transit_path(sn, TravelerProfile(0, frt_node, 1, 7 * 3600.0, betas()))


def test_auto_path_attributes():
    auto, _ = line_network(4)
    p = least_cost_auto_path(auto, traveler(0, 3))
    assert p.nodes == (0, 1, 2, 3)
    assert p.distance == pytest.approx(1.5)
    assert p.auto_ivtt == pytest.approx(6.0)
    assert p.gas_cost == pytest.approx(1.5 * 0.35)
    b = traveler(0, 3).betas
    assert p.cost == pytest.approx(b.d_ivt * 6.0 + b.d_gas * 0.35 * 1.5)


def test_decompose_counts_reboarding_as_transfer():
    sn, _ = _frt_supernet()
    boards = [l for l in sn.links if l.link_type == LinkType.FRT_WAIT and l.boarding]
    attrs = decompose_path(boards[:2])
    assert attrs.transfers == 1
    assert attrs.fare == pytest.approx(2.5)


def test_transfer_link_cost_includes_penalty():
    from fixflex.network import Edge, Node, RoadNetwork

    # two lines crossing at node 1, transfer radius large enough to link them
    nodes = {i: Node(i, float(x), float(y)) for i, (x, y) in enumerate([(0, 0), (800, 0), (1600, 0), (800, 800)])}
    pairs = [(0, 1), (1, 2), (1, 3)]
    edges = []
    for a, b in pairs:
        edges += [Edge(a, b, 0.5, 120.0), Edge(b, a, 0.5, 120.0)]
    net = RoadNetwork(nodes, tuple(edges))
    lines = [FrtLine("A", 10.0, 4.0, 1.0, 19.0, {"0": (0, 1, 2)}),
             FrtLine("B", 10.0, 2.0, 0.5, 19.0, {"0": (1, 3)})]
    p = Params(transfer_radius=1.0)
    sc = ScenarioConfig("x", "FixedOnly", 10.0, 0.0, 0, (), params=p)
    sn = build_supernetwork(net, net, lines, sc, 1.0, 0.0, p)
    t = traveler(0, 3, t_wk=5.0, f_trfr=0.7)
    path = least_cost_transit_path(sn, t)
    assert path.transfers == 1
    assert path.cost == pytest.approx(path_cost(sn, path.links, t.betas, None))
    xfer = [l for l in sn.links if l.link_type == LinkType.FRT_TRANSFER]
    assert xfer and all(l.travel_time == pytest.approx(60 + 5 * 60) for l in xfer)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_router_matches_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    sn, _ = random_supernet(rng)
    o, d = rng.choice(sn.walk_nodes(), 2, replace=False)
    t = TravelerProfile(0, int(o), int(d), 7 * 3600.0, random_betas(rng))
    period = sn.period_of(t.dp_time) if sn.micro_enabled else None
    p = least_cost_transit_path(sn, t)
    oracle = exhaustive_transit_cost(sn, int(o), int(d), t.betas, period)
    got = math.inf if p is None else p.cost
    assert got == pytest.approx(oracle, rel=1e-9, abs=1e-9)
    if p is not None:
        assert p.links[0].from_node == o and p.links[-1].to_node == d
        for a, b in zip(p.links, p.links[1:]):
            assert a.to_node == b.from_node
        assert path_cost(sn, p.links, t.betas, period) == pytest.approx(p.cost, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 5.0))
def test_raising_a_walk_weight_never_lowers_cost(seed, factor):
    rng = np.random.default_rng(seed)
    sn, _ = random_supernet(rng)
    o, d = rng.choice(sn.walk_nodes(), 2, replace=False)
    b = random_betas(rng)
    t1 = TravelerProfile(0, int(o), int(d), 7 * 3600.0, b)
    t2 = TravelerProfile(0, int(o), int(d), 7 * 3600.0, b.scaled("t_wk", 1 + factor))
    p1, p2 = least_cost_transit_path(sn, t1), least_cost_transit_path(sn, t2)
    assert p2.cost >= p1.cost - 1e-9


def test_shortest_path_tree_bound():
    adj = {0: [(1, 5)], 1: [(2, 5)], 2: [(3, 5)]}
    tree = shortest_path_tree(adj, 0, bound=10)
    assert tree.dist == {0: 0, 1: 5, 2: 10}
    assert tree.path_to(2) == [0, 1, 2]
    assert tree.path_to(3) is None


def test_fares_from_params():
    f = Fares.from_params(Params(frt_fare=3.0))
    assert f.frt_flat == 3.0 and f.micro_per_mile == 1.97
