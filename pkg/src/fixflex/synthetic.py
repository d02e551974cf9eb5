"""Desk-scale synthetic city: a square street grid with two crossing FRT lines."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from fixflex.demand import CoefficientSpec, generate_synthetic_demand, peaked_profile, write_demand
from fixflex.network import Edge, FrtLine, Node, RoadNetwork, write_network_files

METERS_PER_MILE = 1609.344


@dataclass(frozen=True)
class CitySpec:
    size: int = 5
    spacing_mi: float = 0.5
    auto_mph: float = 15.0
    frt_mph: float = 12.0
    headway_min: float = 15.0
    operating_hr: float = 19.0
    n_trips: int = 2000
    region: str = "san_diego"
    seed: int = 2024


def grid_city(spec=CitySpec()):
    """Nodes, directed edges, FRT lines and 4-quadrant zone map of the grid."""
    n = spec.size
    nodes = {}
    mid = (n - 1) / 2
    for r in range(n):
        for c in range(n):
            nid = r * n + c
            # jobs fall off with Manhattan distance from the center
            jobs = 100 * (1 + int(2 * mid - abs(r - mid) - abs(c - mid)))
            nodes[nid] = Node(nid, c * spec.spacing_mi * METERS_PER_MILE,
                              r * spec.spacing_mi * METERS_PER_MILE, 0, float(jobs))
    t_link = spec.spacing_mi / spec.auto_mph * 3600.0
    edges = []
    for r in range(n):
        for c in range(n):
            a = r * n + c
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr < n and cc < n:
                    b = rr * n + cc
                    edges.append(Edge(a, b, spec.spacing_mi, t_link))
                    edges.append(Edge(b, a, spec.spacing_mi, t_link))
    edges.sort(key=lambda e: (e.from_node, e.to_node))
    row = n // 2
    horiz = tuple(row * n + c for c in range(n))
    vert = tuple(r * n + row for r in range(n))
    length = (n - 1) * spec.spacing_mi
    duration = length / spec.frt_mph * 60.0
    lines = [
        FrtLine("A", spec.headway_min, duration, length, spec.operating_hr,
                {"0": horiz, "1": tuple(reversed(horiz))}),
        FrtLine("B", spec.headway_min, duration, length, spec.operating_hr,
                {"0": vert, "1": tuple(reversed(vert))}),
    ]
    zones = {}
    for r in range(n):
        for c in range(n):
            zones[r * n + c] = (0 if r < n / 2 else 2) + (0 if c < n / 2 else 1)
    return nodes, edges, lines, zones


def write_synthetic_city(directory, spec=CitySpec()):
    directory = Path(directory)
    nodes, edges, lines, zones = grid_city(spec)
    write_network_files(directory, nodes, edges, lines, zones)
    demand = generate_synthetic_demand(spec.n_trips, RoadNetwork(nodes, tuple(edges)),
                                       peaked_profile(), CoefficientSpec.bundled(spec.region),
                                       spec.seed)
    write_demand(demand, directory / "demand.csv")
    return directory
