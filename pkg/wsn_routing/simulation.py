"""The round engine.

Every round runs in a fixed order: cluster-head election, head advertisements, member-to-head collection,
multipath forwarding toward the base station, death bookkeeping and (when the alive set changed) a rebuild
of the forwarding tables. A node transmits at the power level of its radio range, so every radio neighbor
hears each transmission; only a member whose head lies beyond that range raises the level to reach it.
All randomness comes from one stream per scenario, consumed by the election in node id order and then by
forwarding in packet id order, so a config fully determines a run.
"""
from __future__ import annotations
from typing import Iterable, Optional, Sequence
import dataclasses
import enum
import logging
import math

import numpy as np

from wsn_routing import clustering
from wsn_routing.energy_model import EnergyLedger, charge, header_rx_energy, new_ledger, rx_energy, tx_energy
from wsn_routing.field_model import Cover, CoverageOracle, SensorPlacement, validate_cover_sequence
from wsn_routing.logs import LOGGER_NAME
from wsn_routing.reports import RoundReport, TimeSeries
from wsn_routing.rng import ScenarioRng
from wsn_routing.routing import (
    RoutingTables,
    TopologyGraph,
    build_topology,
    discover_routes,
    next_hop,
    unreachable_nodes,
)
from wsn_routing.script_args.configs import ScenarioConfig


Point = tuple[float, float]
_ENERGY_TOLERANCE = 1e-9


logger = logging.getLogger(LOGGER_NAME)


class SimulationError(Exception):
    pass


class EmptyDeployment(SimulationError):
    pass


class Role(enum.Enum):
    MEMBER = "member"
    CLUSTER_HEAD = "cluster_head"
    BASE_STATION = "base_station"


class PacketKind(enum.Enum):
    DATA = "data"
    CONTROL = "control"


@dataclasses.dataclass
class Node:
    node_id: int
    position: Point
    sensing_range: float
    radio_range: float
    ledger: Optional[EnergyLedger]
    role: Optional[Role] = Role.MEMBER

    @property
    def alive(self) -> bool:
        return self.ledger is None or self.ledger.alive

    @property
    def residual(self) -> float:
        return math.inf if self.ledger is None else self.ledger.residual


@dataclasses.dataclass
class Packet:
    packet_id: int
    origin: int
    kind: PacketKind
    size_bits: int
    readings: int = 1
    own_readings: int = 1


@dataclasses.dataclass(frozen=True)
class ConstraintViolation:
    kind: str
    round_index: Optional[int]
    node_id: Optional[int]
    detail: str

    def __str__(self) -> str:
        where = [f"round {self.round_index}"] if self.round_index is not None else []
        where += [f"node {self.node_id}"] if self.node_id is not None else []
        return f"{self.kind} ({', '.join(where) or 'scenario'}): {self.detail}"


@dataclasses.dataclass
class FlowHistory:
    """Cumulative traffic and energy bookkeeping checked by check_constraints."""

    generated: dict[int, int] = dataclasses.field(default_factory=dict)
    link_counts: dict[tuple[int, int], int] = dataclasses.field(default_factory=dict)
    dropped: dict[int, int] = dataclasses.field(default_factory=dict)
    charged: dict[int, float] = dataclasses.field(default_factory=dict)
    peak_round_spend: dict[int, float] = dataclasses.field(default_factory=dict)
    clamped_shortfall: float = 0.0
    energy_balance: list[tuple[int, float, float, float]] = dataclasses.field(default_factory=list)
    flow_imbalances: list[tuple[int, int, int]] = dataclasses.field(default_factory=list)
    connectivity_breaches: list[tuple[int, int]] = dataclasses.field(default_factory=list)
    control_packets: int = 0

    def outflow(self, node_id: int) -> int:
        return sum(count for (sender, _), count in self.link_counts.items() if sender == node_id)

    def inflow(self, node_id: int) -> int:
        return sum(count for (_, receiver), count in self.link_counts.items() if receiver == node_id)


@dataclasses.dataclass
class _RoundTraffic:
    spent: dict[int, float] = dataclasses.field(default_factory=dict)
    generated: dict[int, int] = dataclasses.field(default_factory=dict)
    link_counts: dict[tuple[int, int], int] = dataclasses.field(default_factory=dict)
    dropped: dict[int, int] = dataclasses.field(default_factory=dict)
    readings_generated: int = 0
    readings_delivered: int = 0


@dataclasses.dataclass
class SimulationState:
    config: ScenarioConfig
    placements: list[SensorPlacement]
    nodes: dict[int, Node]
    base_station: Node
    oracle: CoverageOracle
    topology: TopologyGraph
    tables: RoutingTables
    initial_tables: RoutingTables
    neighbors: dict[int, tuple[int, ...]]
    clusters: list[frozenset[int]]
    weights: list[clustering.NeuronWeights]
    learning_rate: clustering.LearningRate
    leach: Optional[clustering.LeachRotation]
    rng: ScenarioRng
    p_maximum: float
    covers: list[Cover]
    history: FlowHistory = dataclasses.field(default_factory=FlowHistory)
    assignments: list[clustering.ClusterAssignment] = dataclasses.field(default_factory=list)
    round_index: int = 0
    coverage_now: float = 0.0
    alive_is_cover: bool = False
    finished: bool = False
    next_packet_id: int = 0

    @property
    def bs_id(self) -> int:
        return self.base_station.node_id

    def alive_ids(self) -> list[int]:
        return [node_id for node_id, node in sorted(self.nodes.items()) if node.alive]

    def total_residual(self) -> float:
        return sum(node.ledger.residual for node in self.nodes.values())

    def position_of(self, node_id: int) -> Point:
        return self.base_station.position if node_id == self.bs_id else self.nodes[node_id].position

    def distance(self, a: int, b: int) -> float:
        (xa, ya), (xb, yb) = self.position_of(a), self.position_of(b)
        return math.hypot(xa - xb, ya - yb)

    def transmit_reach(self, sender: int, receiver: int) -> float:
        """Distance the sender's power level covers: its radio range, stretched to a receiver beyond it."""
        return max(self.distance(sender, receiver), self.nodes[sender].radio_range)

    def new_packet(
        self,
        origin: int,
        size_bits: int,
        readings: int = 1,
        own_readings: int = 1,
        kind: PacketKind = PacketKind.DATA,
    ) -> Packet:
        if kind is PacketKind.CONTROL:
            readings = own_readings = 0
        packet = Packet(
            packet_id=self.next_packet_id,
            origin=origin,
            kind=kind,
            size_bits=size_bits,
            readings=readings,
            own_readings=own_readings,
        )
        self.next_packet_id += 1
        return packet


def default_p_maximum(config: ScenarioConfig, node_count: Optional[int] = None) -> float:
    """Most energy one node can spend in a round under the one-reading-per-node traffic model.

    Bounds a node that sends a data packet for every node across the field diagonal (or its radio range
    when longer), receives two data packets per node, decodes the header of every possible transmission,
    and sends and hears the advertisements.
    """
    radio = config.radio
    count = config.nodes.count if node_count is None else node_count
    data = radio.data_packet_bytes
    return (
        count * tx_energy(radio, max(config.field.diagonal, config.radio_range), data)
        + 2 * count * rx_energy(radio, data)
        + count * count * header_rx_energy(radio)
        + tx_energy(radio, config.radio_range, radio.header_bytes)
        + count * rx_energy(radio, radio.header_bytes)
    )


def per_round_sensing_cost(config: ScenarioConfig) -> float:
    """Energy a cover member spends per round for cover planning: one data packet at full radio range."""
    return tx_energy(config.radio, config.radio_range, config.radio.data_packet_bytes)


def deploy(config: ScenarioConfig, positions: Optional[Sequence[Point]] = None) -> SimulationState:
    """Place the nodes, form the fixed clusters and build the initial forwarding tables.

    Positions are drawn uniformly over the field from the placement seed unless given explicitly.
    """
    count = config.nodes.count if positions is None else len(positions)
    if count == 0:
        raise EmptyDeployment("node_count must be positive")
    field = config.field
    if positions is None:
        positions = _random_positions(config)
    for x, y in positions:
        if not (0.0 <= x <= field.width and 0.0 <= y <= field.height):
            raise SimulationError(f"Node position ({x}, {y}) lies outside the field.")

    radio_range = config.radio_range
    placements = [
        SensorPlacement(node_id, (float(x), float(y)), config.nodes.sensing_range, radio_range)
        for node_id, (x, y) in enumerate(positions)
    ]
    oracle = CoverageOracle(placements, field)
    bs_id = count
    all_positions = {placement.node_id: placement.position for placement in placements}
    all_positions[bs_id] = field.bs_position
    topology = build_topology(
        all_positions,
        radio_range,
        config.radio,
        oracle.coverage_areas(),
        config.routing.delivery_ratio,
        sinks=(bs_id,),
    )
    nodes = {
        placement.node_id: Node(
            placement.node_id,
            placement.position,
            placement.sensing_range,
            radio_range,
            new_ledger(placement.node_id, config.nodes.initial_energy),
        )
        for placement in placements
    }
    base_station = Node(bs_id, field.bs_position, 0.0, radio_range, None, Role.BASE_STATION)

    if config.protocol.name == "proposed":
        clusters = clustering.form_clusters(oracle.subregions(), placements, field, oracle.grid, config.cluster_count)
        leach = None
    else:
        clusters = []
        leach = clustering.LeachRotation(config.protocol.leach_p)

    tables = discover_routes(topology, bs_id, config.routing.alpha)
    state = SimulationState(
        config=config,
        placements=placements,
        nodes=nodes,
        base_station=base_station,
        oracle=oracle,
        topology=topology,
        tables=tables,
        initial_tables=tables,
        neighbors=_radio_neighbors(placements, radio_range),
        clusters=clusters,
        weights=clustering.zero_weights(len(clusters)),
        learning_rate=clustering.LearningRate(config.protocol.mu, config.protocol.mu_decay),
        leach=leach,
        rng=ScenarioRng(config.seeds.rng),
        p_maximum=config.protocol.p_maximum or default_p_maximum(config, count),
        covers=[],
    )
    state.coverage_now = oracle.ratio(nodes)
    state.alive_is_cover = oracle.is_cover(nodes)
    if field.plan_covers:
        state.covers = oracle.greedy_cover_sequence(
            {node_id: config.nodes.initial_energy for node_id in nodes},
            per_round_sensing_cost(config),
            max_covers=field.plan_limit,
        )
        logger.info(f"Cover plan holds {len(state.covers)} covers (limit {field.plan_limit}).")
    logger.info(
        f"Deployed {count} nodes on a {field.width:g}x{field.height:g} m field: coverage "
        f"{state.coverage_now:.4f}, radio range {radio_range:g} m, {len(clusters)} fixed clusters, "
        f"{len(unreachable_nodes(tables))} nodes without a route."
    )
    return state


def run_round(state: SimulationState) -> tuple[SimulationState, RoundReport]:
    """Advance the scenario by one round and report it. The state is updated in place."""
    config = state.config
    round_index = state.round_index
    alive = state.alive_ids()
    node_count = len(state.nodes)
    start_total = state.total_residual()

    if not alive:
        state.finished = True
        state.round_index += 1
        report = RoundReport(round_index, 0, start_total / node_count, 0, 0, 0.0, frozenset(), network_dead=True)
        logger.info(f"Round {round_index}: every node is dead.")
        return state, report

    coverage = state.coverage_now
    assignments = state.assignments = _elect(state, alive)
    heads = frozenset(assignment.head for assignment in assignments if assignment.head is not None)
    for node_id in alive:
        state.nodes[node_id].role = Role.CLUSTER_HEAD if node_id in heads else Role.MEMBER
    _monitor_connectivity(state, heads)

    traffic = _RoundTraffic(readings_generated=len(alive))
    for assignment in assignments:
        _advertise(state, traffic, assignment)
    received = _collect(state, traffic, assignments)
    for packet in _upstream_packets(state, assignments, received):
        _route(state, traffic, packet)

    newly_dead = [node_id for node_id in alive if not state.nodes[node_id].alive]
    for node_id in newly_dead:
        state.nodes[node_id].role = None
        logger.debug(f"Node {node_id} died in round {round_index}.")
    _close_books(state, traffic, round_index, start_total)

    if newly_dead:
        alive_now = state.alive_ids()
        state.coverage_now = state.oracle.ratio(alive_now)
        state.alive_is_cover = state.oracle.is_cover(alive_now)
    if newly_dead or config.routing.rebuild == "every_round":
        rebuild_tables(state)

    report = RoundReport(
        round_index=round_index,
        alive_count=len(alive),
        mean_residual=start_total / node_count,
        packets_generated=traffic.readings_generated,
        packets_delivered=traffic.readings_delivered,
        coverage_ratio_now=coverage,
        ch_ids=heads,
    )
    logger.debug(
        f"Round {round_index}: {len(alive)} alive, {len(heads)} heads, "
        f"{traffic.readings_delivered}/{traffic.readings_generated} readings delivered."
    )
    state.round_index += 1
    return state, report


def rebuild_tables(state: SimulationState) -> None:
    alive = state.alive_ids()
    graph = state.topology.restricted_to([*alive, state.bs_id])
    state.tables = discover_routes(graph, state.bs_id, state.config.routing.alpha)
    logger.debug(
        f"Rebuilt forwarding tables for {len(alive)} alive nodes, "
        f"{len(unreachable_nodes(state.tables))} without a route."
    )


def simulate(
    config: ScenarioConfig, positions: Optional[Sequence[Point]] = None
) -> tuple[SimulationState, TimeSeries]:
    """Run a scenario until `rounds_max` or network death and return the final state with the reports."""
    state = deploy(config, positions)
    logger.info(
        f"Starting scenario '{config.scenario.label}' with protocol {config.protocol.name} "
        f"(placement seed {config.seeds.placement}, rng seed {config.seeds.rng})."
    )
    reports: list[RoundReport] = []
    while state.round_index < config.protocol.rounds_max and not state.finished:
        state, report = run_round(state)
        reports.append(report)
    logger.info(
        f"Scenario '{config.scenario.label}' ({config.protocol.name}) finished after {len(reports)} rounds "
        f"with {len(state.alive_ids())} nodes alive."
    )
    return state, TimeSeries(config.scenario.label, tuple(reports))


def run_scenario(config: ScenarioConfig, positions: Optional[Sequence[Point]] = None) -> TimeSeries:
    return simulate(config, positions)[1]


def check_constraints(state: SimulationState, history: Optional[FlowHistory] = None) -> list[ConstraintViolation]:
    """Return every breach of the energy budget, the per-round power cap, non-negative link flows,
    per-node flow conservation, energy conservation, the coverage-implies-connectivity rule and the cover plan.
    """
    history = history or state.history
    violations: list[ConstraintViolation] = []
    for node_id, node in sorted(state.nodes.items()):
        spent = history.charged.get(node_id, 0.0)
        if spent > node.ledger.initial * (1 + _ENERGY_TOLERANCE):
            violations.append(
                ConstraintViolation("energy_budget", None, node_id, f"spent {spent} J of {node.ledger.initial} J")
            )
        peak = history.peak_round_spend.get(node_id, 0.0)
        if peak > state.p_maximum:
            violations.append(
                ConstraintViolation("power_cap", None, node_id, f"spent {peak} J in one round, cap {state.p_maximum} J")
            )
        balance = (
            history.outflow(node_id)
            - history.inflow(node_id)
            + history.dropped.get(node_id, 0)
            - history.generated.get(node_id, 0)
        )
        if balance != 0:
            violations.append(ConstraintViolation("flow_conservation", None, node_id, f"cumulative imbalance {balance}"))
    for (sender, receiver), count in sorted(history.link_counts.items()):
        if count < 0:
            violations.append(ConstraintViolation("negative_flow", None, sender, f"{count} readings to {receiver}"))
    for round_index, node_id, balance in history.flow_imbalances:
        violations.append(ConstraintViolation("flow_conservation", round_index, node_id, f"imbalance {balance}"))
    for round_index, start, spent, end in history.energy_balance:
        if abs(start - spent - end) > _ENERGY_TOLERANCE * max(1.0, start):
            violations.append(
                ConstraintViolation(
                    "energy_conservation", round_index, None, f"{start} J - {spent} J charged != {end} J left"
                )
            )
    for round_index, node_id in history.connectivity_breaches:
        violations.append(
            ConstraintViolation("coverage_connectivity", round_index, node_id, "covered network but head has no route")
        )
    if state.covers:
        problems = validate_cover_sequence(
            state.covers,
            state.placements,
            state.config.field,
            {node_id: node.ledger.initial for node_id, node in state.nodes.items()},
            per_round_sensing_cost(state.config),
        )
        violations.extend(ConstraintViolation("cover_plan", None, None, problem) for problem in problems)
    return violations


def _random_positions(config: ScenarioConfig) -> list[Point]:
    rng = ScenarioRng(config.seeds.placement)
    xs = rng.uniform(0.0, config.field.width, config.nodes.count)
    ys = rng.uniform(0.0, config.field.height, config.nodes.count)
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


def _radio_neighbors(placements: Sequence[SensorPlacement], radio_range: float) -> dict[int, tuple[int, ...]]:
    ids = [placement.node_id for placement in placements]
    coords = np.array([placement.position for placement in placements], dtype=float)
    distances = np.hypot(coords[:, None, 0] - coords[None, :, 0], coords[:, None, 1] - coords[None, :, 1])
    within = distances <= radio_range
    np.fill_diagonal(within, False)
    return {node_id: tuple(ids[j] for j in np.flatnonzero(within[i])) for i, node_id in enumerate(ids)}


def _elect(state: SimulationState, alive: list[int]) -> list[clustering.ClusterAssignment]:
    if state.leach is not None:
        eligible = state.leach.eligible(alive, state.round_index)
        heads = clustering.leach_elect(state.round_index, state.config.protocol.leach_p, eligible, state.rng)
        state.leach.record(heads, state.round_index)
        return clustering.assign_members({node_id: state.nodes[node_id].position for node_id in alive}, heads)

    config = state.config
    alive_set = set(alive)
    patterns: dict[int, clustering.InputPattern] = {}
    eligible: set[int] = set()
    for members in state.clusters:
        cluster = sorted(node_id for node_id in members if node_id in alive_set)
        if not cluster:
            continue
        floor = clustering.duty_cost_floor(config.radio, len(cluster), config.radio_range)
        candidates = [
            clustering.CandidateState(
                node_id,
                state.nodes[node_id].ledger.residual,
                state.nodes[node_id].ledger.initial,
                _cluster_delivery_energy(state, cluster, node_id),
                state.distance(node_id, state.bs_id),
            )
            for node_id in cluster
        ]
        patterns.update(clustering.build_patterns(candidates, config.field.diagonal, energy_scale=floor))
        eligible.update(node_id for node_id in cluster if state.nodes[node_id].ledger.residual >= floor)

    assignments, state.weights = clustering.elect_cluster_heads(
        state.clusters, patterns, eligible, state.weights, state.learning_rate
    )
    state.learning_rate = state.learning_rate.decayed()
    return clustering.regroup_by_nearest_head(
        assignments, {node_id: state.nodes[node_id].position for node_id in alive}
    )


def _cluster_delivery_energy(state: SimulationState, cluster: Sequence[int], head: int) -> float:
    """Energy the cluster spends to get one round of readings one hop past `head`, were it elected."""
    radio = state.config.radio
    data = radio.data_packet_bytes
    collection = sum(
        tx_energy(radio, state.transmit_reach(member, head), data) + rx_energy(radio, data)
        for member in cluster
        if member != head
    )
    table = state.tables.get(head)
    hop = table.best_entry().neighbor if table is not None and table.entries else state.bs_id
    upstream = tx_energy(radio, state.transmit_reach(head, hop), data)
    if hop != state.bs_id:
        upstream += rx_energy(radio, data)
    return (collection + upstream) / state.config.routing.delivery_ratio


def _monitor_connectivity(state: SimulationState, heads: Iterable[int]) -> None:
    config = state.config
    if config.radio_range < 2 * config.nodes.sensing_range or not state.alive_is_cover:
        return
    for head in sorted(heads):
        table = state.tables.get(head)
        if table is None or not table.entries:
            state.history.connectivity_breaches.append((state.round_index, head))
            logger.warning(
                f"Round {state.round_index}: the alive nodes cover the field but head {head} has no route."
            )


def _advertise(state: SimulationState, traffic: _RoundTraffic, assignment: clustering.ClusterAssignment) -> None:
    head = assignment.head
    if head is None or len(assignment.members) < 2 or not state.nodes[head].alive:
        return
    radio = state.config.radio
    advertisement = state.new_packet(head, radio.header_bits, kind=PacketKind.CONTROL)
    size = advertisement.size_bits / 8
    state.history.control_packets += 1
    if not _charge(state, traffic, head, tx_energy(radio, state.nodes[head].radio_range, size)):
        return
    for neighbor in state.neighbors[head]:
        if not state.nodes[neighbor].alive:
            continue
        if neighbor in assignment.members:
            _charge(state, traffic, neighbor, rx_energy(radio, size))
        else:
            _charge(state, traffic, neighbor, header_rx_energy(radio))


def _collect(
    state: SimulationState, traffic: _RoundTraffic, assignments: Sequence[clustering.ClusterAssignment]
) -> dict[int, int]:
    """Members send their reading to their head; returns the readings each head received."""
    received: dict[int, int] = {}
    data_bits = state.config.radio.data_packet_bits
    for assignment in assignments:
        head = assignment.head
        if head is None:
            continue
        received[head] = 0
        for member in sorted(assignment.members - {head}):
            packet = state.new_packet(member, data_bits)
            if _hop(state, traffic, packet, member, head):
                received[head] += 1
    return received


def _upstream_packets(
    state: SimulationState,
    assignments: Sequence[clustering.ClusterAssignment],
    received: dict[int, int],
) -> list[Packet]:
    data_bits = state.config.radio.data_packet_bits
    plan: list[tuple[int, int, int]] = []
    for assignment in assignments:
        if assignment.head is None:
            plan.extend((member, 1, 1) for member in assignment.members)
        elif state.config.protocol.aggregate:
            plan.append((assignment.head, 1 + received[assignment.head], 1))
        else:
            plan.append((assignment.head, 1, 1))
            plan.extend((assignment.head, 1, 0) for _ in range(received[assignment.head]))
    plan.sort(key=lambda item: (item[0], -item[2]))
    return [state.new_packet(origin, data_bits, readings, own) for origin, readings, own in plan]


def _route(state: SimulationState, traffic: _RoundTraffic, packet: Packet) -> None:
    if packet.kind is not PacketKind.DATA:
        raise SimulationError(f"Packet {packet.packet_id} is a {packet.kind.value} packet; only data is forwarded.")
    holder = packet.origin
    for _ in range(len(state.nodes) + 1):
        table = state.tables.get(holder)
        if not state.nodes[holder].alive or table is None or not table.entries:
            _drop(traffic, packet, holder)
            return
        receiver = next_hop(table, state.rng)
        if not _hop(state, traffic, packet, holder, receiver):
            return
        if receiver == state.bs_id:
            traffic.readings_delivered += packet.readings
            return
        holder = receiver
    raise SimulationError(f"Packet {packet.packet_id} exceeded the hop limit.")


def _hop(state: SimulationState, traffic: _RoundTraffic, packet: Packet, sender: int, receiver: int) -> bool:
    if not _transmit(state, traffic, sender, receiver, packet.size_bits):
        _drop(traffic, packet, sender)
        return False
    if sender == packet.origin:
        traffic.generated[sender] = traffic.generated.get(sender, 0) + packet.own_readings
    traffic.link_counts[(sender, receiver)] = traffic.link_counts.get((sender, receiver), 0) + packet.readings
    return True


def _drop(traffic: _RoundTraffic, packet: Packet, holder: int) -> None:
    """Readings the holder received but could not pass on are dropped at the holder."""
    lost = packet.readings - packet.own_readings if holder == packet.origin else packet.readings
    traffic.dropped[holder] = traffic.dropped.get(holder, 0) + lost


def _transmit(state: SimulationState, traffic: _RoundTraffic, sender: int, receiver: int, size_bits: int) -> bool:
    """Charge one data transmission; succeeds iff the sender pays the full send and the receiver the full receive."""
    radio = state.config.radio
    payload = size_bits / 8
    if not state.nodes[sender].alive:
        return False
    if not _charge(state, traffic, sender, tx_energy(radio, state.transmit_reach(sender, receiver), payload)):
        return False
    if radio.overhearing:
        for neighbor in state.neighbors[sender]:
            if neighbor != receiver and state.nodes[neighbor].alive:
                _charge(state, traffic, neighbor, header_rx_energy(radio))
    if receiver == state.bs_id:
        return True
    return state.nodes[receiver].alive and _charge(state, traffic, receiver, rx_energy(radio, payload))


def _charge(state: SimulationState, traffic: _RoundTraffic, node_id: int, amount: float) -> bool:
    """Debit `amount` from an alive node; False when the node could not pay in full and died trying."""
    node = state.nodes[node_id]
    before = node.ledger.residual
    node.ledger = charge(node.ledger, amount)
    traffic.spent[node_id] = traffic.spent.get(node_id, 0.0) + (before - node.ledger.residual)
    if before >= amount:
        return True
    shortfall = amount - before
    state.history.clamped_shortfall += shortfall
    logger.warning(f"Node {node_id} ran out of energy in round {state.round_index}, {shortfall:.3e} J short.")
    return False


def _close_books(state: SimulationState, traffic: _RoundTraffic, round_index: int, start_total: float) -> None:
    history = state.history
    for node_id, spent in traffic.spent.items():
        history.charged[node_id] = history.charged.get(node_id, 0.0) + spent
        history.peak_round_spend[node_id] = max(history.peak_round_spend.get(node_id, 0.0), spent)
    for node_id, count in traffic.generated.items():
        history.generated[node_id] = history.generated.get(node_id, 0) + count
    for link, count in traffic.link_counts.items():
        history.link_counts[link] = history.link_counts.get(link, 0) + count
    for node_id, count in traffic.dropped.items():
        history.dropped[node_id] = history.dropped.get(node_id, 0) + count

    balance: dict[int, int] = {}
    for (sender, receiver), count in traffic.link_counts.items():
        balance[sender] = balance.get(sender, 0) + count
        balance[receiver] = balance.get(receiver, 0) - count
    for node_id, count in traffic.dropped.items():
        balance[node_id] = balance.get(node_id, 0) + count
    for node_id, count in traffic.generated.items():
        balance[node_id] = balance.get(node_id, 0) - count
    for node_id, value in sorted(balance.items()):
        if node_id != state.bs_id and value != 0:
            history.flow_imbalances.append((round_index, node_id, value))

    spent_total = sum(traffic.spent.values())
    history.energy_balance.append((round_index, start_total, spent_total, state.total_residual()))
