"""Route discovery toward the base station and probabilistic multipath forwarding.

The base station floods a discovery request; every node delays the re-broadcast in proportion to its
accumulated cost, so the request reaches each node first along its minimum-cost path. Settling nodes in
non-decreasing cost order (Dijkstra from the destination) yields the same tables without an event clock.
"""
from __future__ import annotations
from typing import Iterable, Mapping, Optional, Protocol, Sequence
import dataclasses
import math

import networkx as nx
import numpy as np

from wsn_routing.routing_metric import LinkCost, make_link_cost
from wsn_routing.script_args.configs import RadioParams


Point = tuple[float, float]
DEFAULT_ALPHA = 2.0
PROBABILITY_TOLERANCE = 1e-9


class RoutingError(Exception):
    pass


class ZeroCostLink(RoutingError):
    pass


class UnreachableDestination(RoutingError):
    pass


class UniformSource(Protocol):
    def random(self) -> float: ...


@dataclasses.dataclass(frozen=True)
class ForwardingEntry:
    neighbor: int
    cost_to_destination: float
    probability: float

    def __post_init__(self) -> None:
        if not 0.0 < self.probability <= 1.0:
            raise RoutingError(f"Probability {self.probability} of neighbor {self.neighbor} is outside (0, 1].")


@dataclasses.dataclass(frozen=True)
class ForwardingTable:
    owner: int
    destination: int
    entries: tuple[ForwardingEntry, ...]
    average_cost: float

    @property
    def reachable(self) -> bool:
        return self.owner == self.destination or bool(self.entries)

    @property
    def neighbors(self) -> tuple[int, ...]:
        return tuple(entry.neighbor for entry in self.entries)

    def best_entry(self) -> ForwardingEntry:
        if not self.entries:
            raise UnreachableDestination("unreachable destination")
        return min(self.entries, key=lambda entry: (entry.cost_to_destination, entry.neighbor))


RoutingTables = dict[int, ForwardingTable]


class TopologyGraph:
    """Directed radio graph; an edge u -> v carries the cost of u sending a data packet to v."""

    def __init__(self, positions: Mapping[int, Point]):
        self.positions: dict[int, Point] = dict(positions)
        self.graph = nx.DiGraph()
        for node_id in sorted(self.positions):
            self.graph.add_node(node_id, pos=self.positions[node_id])

    def add_link(self, link: LinkCost) -> None:
        if link.sender == link.receiver:
            raise RoutingError(f"Self-edge at node {link.sender}.")
        for node_id in (link.sender, link.receiver):
            if node_id not in self.positions:
                raise RoutingError(f"Node {node_id} has no position in the topology.")
        self.graph.add_edge(link.sender, link.receiver, link=link, cost=link.value)

    @property
    def vertices(self) -> list[int]:
        return sorted(self.graph.nodes)

    def link(self, sender: int, receiver: int) -> LinkCost:
        return self.graph.edges[sender, receiver]["link"]

    def distance(self, a: int, b: int) -> float:
        return _distance(self.positions[a], self.positions[b])

    def restricted_to(self, node_ids: Iterable[int]) -> TopologyGraph:
        """The subgraph induced by `node_ids`, e.g. the alive nodes plus the base station."""
        keep = set(node_ids)
        restricted = TopologyGraph({node_id: pos for node_id, pos in self.positions.items() if node_id in keep})
        restricted.graph.add_edges_from(
            (sender, receiver, data)
            for sender, receiver, data in self.graph.edges(data=True)
            if sender in keep and receiver in keep
        )
        return restricted


def build_topology(
    positions: Mapping[int, Point],
    radio_range: float,
    params: RadioParams,
    coverage_areas: Mapping[int, float],
    delivery_ratio: float = 1.0,
    sinks: Iterable[int] = (),
) -> TopologyGraph:
    """Connect every ordered pair of nodes within `radio_range`; sinks receive but never send."""
    graph = TopologyGraph(positions)
    ids = graph.vertices
    sink_ids = set(sinks)
    if not ids:
        return graph
    coords = np.array([positions[node_id] for node_id in ids], dtype=float)
    distances = np.hypot(coords[:, None, 0] - coords[None, :, 0], coords[:, None, 1] - coords[None, :, 1])
    for i, sender in enumerate(ids):
        if sender in sink_ids:
            continue
        for j in np.flatnonzero(distances[i] <= radio_range):
            receiver = ids[int(j)]
            if receiver == sender:
                continue
            graph.add_link(
                make_link_cost(sender, receiver, params, float(distances[i, j]), coverage_areas[sender], delivery_ratio)
            )
    return graph


def geometric_forward_filter(
    candidate: int,
    holder: int,
    source: int,
    destination: int,
    positions: Mapping[int, Point],
) -> bool:
    """True iff the discovery request held by `holder` may be passed on to `candidate`.

    The candidate must be no farther from the source and no closer to the destination than the holder.
    """
    d = lambda a, b: _distance(positions[a], positions[b])
    return d(holder, source) >= d(candidate, source) and d(holder, destination) <= d(candidate, destination)


def discover_routes(graph: TopologyGraph, destination: int, alpha: float = DEFAULT_ALPHA) -> RoutingTables:
    """Build every node's forwarding table toward `destination`.

    A data hop v -> u is admissible when the request held by u may be passed on to v with v as the
    source. Exact distance ties are admitted only toward the lower node id so the admissible graph stays
    acyclic. Nodes without an admissible path get an empty table.
    """
    if destination not in graph.graph:
        raise RoutingError(f"Destination {destination} is not part of the topology.")
    admissible = _admissible_subgraph(graph, destination)
    suffix = nx.single_source_dijkstra_path_length(admissible.reverse(copy=False), destination, weight="cost")

    tables: RoutingTables = {}
    for owner in graph.vertices:
        if owner == destination:
            tables[owner] = ForwardingTable(owner, destination, (), 0.0)
            continue
        candidates = [
            (neighbor, data["cost"] + suffix[neighbor])
            for neighbor, data in admissible.succ[owner].items()
            if neighbor in suffix
        ]
        if not candidates:
            tables[owner] = ForwardingTable(owner, destination, (), math.inf)
            continue
        entries = assign_probabilities(prune_table(candidates, alpha))
        tables[owner] = ForwardingTable(owner, destination, tuple(entries), average_cost(entries))
    return tables


def unreachable_nodes(tables: RoutingTables) -> frozenset[int]:
    return frozenset(owner for owner, table in tables.items() if not table.reachable)


def prune_table(candidates: Sequence[tuple[int, float]], alpha: float) -> list[tuple[int, float]]:
    """Keep the candidates whose cost is within `alpha` times the cheapest one."""
    if not candidates:
        raise RoutingError("Cannot prune an empty candidate list.")
    if alpha < 1:
        raise RoutingError(f"Pruning factor {alpha} must be at least 1.")
    best = min(cost for _, cost in candidates)
    return sorted((neighbor, cost) for neighbor, cost in candidates if cost <= alpha * best)


def assign_probabilities(retained: Sequence[tuple[int, float]]) -> list[ForwardingEntry]:
    if any(cost <= 0 for _, cost in retained):
        raise ZeroCostLink("zero-cost link")
    inverse_total = sum(1.0 / cost for _, cost in retained)
    return [
        ForwardingEntry(neighbor=neighbor, cost_to_destination=cost, probability=(1.0 / cost) / inverse_total)
        for neighbor, cost in sorted(retained)
    ]


def average_cost(entries: Sequence[ForwardingEntry]) -> float:
    """Probability-weighted cost of reaching the destination through the table; advertised upstream."""
    if not entries:
        raise RoutingError("Cannot average an empty forwarding table.")
    return sum(entry.probability * entry.cost_to_destination for entry in entries)


def next_hop(table: ForwardingTable, rng: UniformSource) -> int:
    """Sample a neighbor with the table's probabilities (inverse CDF over entries sorted by neighbor id)."""
    if not table.entries:
        raise UnreachableDestination("unreachable destination")
    draw = rng.random()
    cumulative = 0.0
    entries = sorted(table.entries, key=lambda entry: entry.neighbor)
    for entry in entries:
        cumulative += entry.probability
        if draw < cumulative:
            return entry.neighbor
    return entries[-1].neighbor


def dump_tables(tables: RoutingTables) -> str:
    """One line per entry: `owner neighbor cost probability`, costs and probabilities to 9 significant digits."""
    lines = [
        f"{owner} {entry.neighbor} {entry.cost_to_destination:.9g} {entry.probability:.9g}"
        for owner in sorted(tables)
        for entry in tables[owner].entries
    ]
    return "".join(line + "\n" for line in lines)


def _admissible_subgraph(graph: TopologyGraph, destination: int) -> nx.DiGraph:
    admissible = nx.DiGraph()
    admissible.add_nodes_from(graph.graph.nodes)
    for sender, receiver, data in graph.graph.edges(data=True):
        if sender == destination:
            continue
        if receiver == destination or _admissible_hop(graph, sender, receiver, destination):
            admissible.add_edge(sender, receiver, **data)
    return admissible


def _admissible_hop(graph: TopologyGraph, sender: int, receiver: int, destination: int) -> bool:
    if not geometric_forward_filter(sender, receiver, sender, destination, graph.positions):
        return False
    if graph.distance(receiver, destination) == graph.distance(sender, destination):
        return receiver < sender
    return True


def _distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def brute_force_suffix_costs(graph: TopologyGraph, destination: int) -> dict[int, Optional[float]]:
    """Minimum admissible path cost of every node by exhaustive enumeration; for cross-checking small graphs."""
    admissible = _admissible_subgraph(graph, destination)
    costs: dict[int, Optional[float]] = {}
    for node in graph.vertices:
        if node == destination:
            costs[node] = 0.0
            continue
        best: Optional[float] = None
        for path in nx.all_simple_paths(admissible, node, destination):
            total = 0.0
            for sender, receiver in reversed(list(zip(path, path[1:]))):
                total = admissible.edges[sender, receiver]["cost"] + total
            if best is None or total < best:
                best = total
        costs[node] = best
    return costs
