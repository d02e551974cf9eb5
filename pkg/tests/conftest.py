import math
from pathlib import Path

import numpy as np
import pytest

from fixflex.config import ScenarioConfig
from fixflex.demand import CoefficientVector, TravelerProfile, load_demand
from fixflex.equilibrium import Networks
from fixflex.network import Edge, FrtLine, Node, RoadNetwork, build_supernetwork, load_networks, \
    load_zone_map

ROOT = Path(__file__).resolve().parents[1]
CITY = ROOT / "data" / "synthetic_city"


def betas(**kw):
    base = dict(d0=0.0, d_ivt=0.05, d_gas=0.3, t0=0.0, t_wk=0.08, m_wt=0.06, f_wt=0.06,
                m_ivt=0.04, f_ivt=0.04, f_trfr=0.5, t_fr=0.3)
    base.update(kw)
    return CoefficientVector(**base)


def traveler(o, d, dp=7 * 3600.0, rq=0, **kw):
    return TravelerProfile(rq, o, d, dp, betas(**kw))


def line_network(n=4, spacing=0.5, mph=15.0, walk_mph=2.8):
    """Bidirectional path 0-1-...-(n-1). Returns (auto, walk)."""
    nodes = {i: Node(i, i * 800.0, 0.0, 0, 100.0) for i in range(n)}
    auto, walk = [], []
    for i in range(n - 1):
        for a, b in ((i, i + 1), (i + 1, i)):
            auto.append(Edge(a, b, spacing, spacing / mph * 3600))
            walk.append(Edge(a, b, spacing, spacing / walk_mph * 3600))
    return RoadNetwork(nodes, tuple(auto)), RoadNetwork(nodes, tuple(walk))


def random_city(rng, max_nodes=12, p_extra=0.25, with_frt=True):
    """Random connected street graph plus up to two FRT lines along tree paths."""
    n = int(rng.integers(3, max_nodes + 1))
    nodes = {i: Node(i, float(rng.uniform(0, 3000)), float(rng.uniform(0, 3000)),
                     int(rng.integers(0, 2)), float(rng.integers(0, 500))) for i in range(n)}
    pairs = set()
    for i in range(1, n):
        pairs.add((int(rng.integers(0, i)), i))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_extra:
                pairs.add((i, j))
    auto, walk = [], []
    for a, b in sorted(pairs):
        length = float(rng.uniform(0.1, 1.0))
        speed = float(rng.uniform(10, 30))
        for u, v in ((a, b), (b, a)):
            auto.append(Edge(u, v, length, length / speed * 3600))
            walk.append(Edge(u, v, length, length / 2.8 * 3600))
    auto_net = RoadNetwork(nodes, tuple(auto))
    walk_net = RoadNetwork(nodes, tuple(walk))
    lines = []
    if with_frt:
        adj = {i: [] for i in range(n)}
        for a, b in pairs:
            adj[a].append(b)
            adj[b].append(a)
        for k in range(int(rng.integers(1, 3))):
            # random walk without revisits gives a valid stop sequence
            seq = [int(rng.integers(0, n))]
            for _ in range(int(rng.integers(1, 5))):
                nxt = [x for x in adj[seq[-1]] if x not in seq]
                if not nxt:
                    break
                seq.append(int(rng.choice(nxt)))
            if len(seq) < 2:
                continue
            L = float(rng.uniform(0.5, 3.0))
            lines.append(FrtLine(f"R{k}", 15.0, L / 12 * 60, L, 19.0,
                                 {"0": tuple(seq), "1": tuple(reversed(seq))}))
    return auto_net, walk_net, lines


def random_supernet(rng, micro=None, transfer_radius=None):
    from fixflex.config import Params

    auto, walk, lines = random_city(rng)
    if micro is None:
        micro = bool(rng.random() < 0.7)
    headway = float(rng.choice([5.0, 15.0, 30.0]))
    cov = float(rng.choice([0.25, 0.5, 1.0]))
    radius = float(rng.choice([0.0, 800.0])) if transfer_radius is None else transfer_radius
    params = Params(transfer_radius=radius)
    if lines and micro:
        sc = ScenarioConfig("t", "MicroPlusFixed", headway, cov, 3, ("AM",), params=params,
                            master_seed=int(rng.integers(1000)))
    elif lines:
        sc = ScenarioConfig("t", "FixedOnly", headway, 0.0, 0, (), params=params)
    else:
        sc = ScenarioConfig("t", "MicroOnly", None, cov, 3, ("AM",), params=params)
    sn = build_supernetwork(walk, auto, lines, sc, float(rng.uniform(1.0, 1.6)),
                            float(rng.uniform(0, 900)), params)
    return sn, auto


def random_betas(rng):
    names = ["d0", "d_ivt", "d_gas", "t0", "t_wk", "m_wt", "f_wt", "m_ivt", "f_ivt", "f_trfr", "t_fr"]
    vals = rng.uniform(0, 1.0, size=len(names))
    # some exact zeros exercise ties
    vals[rng.random(len(names)) < 0.1] = 0.0
    return CoefficientVector(**dict(zip(names, map(float, vals))))


@pytest.fixture(scope="session")
def city():
    auto, walk, lines = load_networks(CITY / "links.csv", CITY / "frt_lines.csv", CITY / "nodes.csv")
    return Networks(auto, walk, lines)


@pytest.fixture(scope="session")
def city_zones():
    return load_zone_map(CITY / "zones.csv")


@pytest.fixture(scope="session")
def city_demand():
    return load_demand(CITY / "demand.csv")


def approx_equal(a, b, tol=1e-9):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def seeded(seed):
    return np.random.default_rng(seed)
