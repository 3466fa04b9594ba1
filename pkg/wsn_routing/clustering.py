"""Cluster formation and cluster-head election.

The proposed protocol keeps the clusters fixed from deployment and rotates the head inside each of them by
winner-take-all competitive learning: one neuron per cluster, the winner is the candidate whose feature
vector lies closest to the neuron, and only the winner's neuron learns. LEACH is the randomized baseline.
"""
from __future__ import annotations
from typing import Collection, Iterable, Mapping, Optional, Protocol, Sequence
import dataclasses
import logging
import math

import numpy as np

from wsn_routing.energy_model import rx_energy, tx_energy
from wsn_routing.field_model import FieldGrid, SensorPlacement, SubRegion
from wsn_routing.logs import LOGGER_NAME
from wsn_routing.script_args.configs import FieldConfig, RadioParams


Point = tuple[float, float]
FEATURE_DIMENSION = 3
# depletion, delivery energy, distance to the base station
FEATURE_WEIGHTS = np.array([1.0, 2.0, 1.0])
FORMATION_EPOCHS = 20
FORMATION_RATE = 0.5
FORMATION_RATE_DECAY = 0.8
_FEATURE_TOLERANCE = 1e-12


logger = logging.getLogger(LOGGER_NAME)


class ClusteringError(Exception):
    pass


class NoEligibleCandidates(ClusteringError):
    pass


class DimensionMismatch(ClusteringError):
    pass


class UniformSource(Protocol):
    def random(self) -> float: ...


@dataclasses.dataclass(frozen=True, eq=False)
class InputPattern:
    node_id: int
    features: np.ndarray

    def __post_init__(self) -> None:
        if self.features.shape != (FEATURE_DIMENSION,):
            raise DimensionMismatch(f"Pattern of node {self.node_id} has shape {self.features.shape}.")
        if np.any(self.features < -_FEATURE_TOLERANCE) or np.any(self.features > 1 + _FEATURE_TOLERANCE):
            raise ClusteringError(f"Pattern of node {self.node_id} has features outside [0, 1]: {self.features}.")


@dataclasses.dataclass(frozen=True, eq=False)
class NeuronWeights:
    cluster_id: int
    weights: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.weights)):
            raise ClusteringError(f"Neuron of cluster {self.cluster_id} has non-finite weights.")


@dataclasses.dataclass(frozen=True)
class LearningRate:
    mu: float
    decay: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu <= 1.0:
            raise ClusteringError(f"Learning rate {self.mu} is outside [0, 1].")
        if not 0.0 < self.decay <= 1.0:
            raise ClusteringError(f"Learning rate decay {self.decay} is outside (0, 1].")

    def decayed(self) -> LearningRate:
        return LearningRate(mu=self.mu * self.decay, decay=self.decay)


@dataclasses.dataclass(frozen=True)
class ClusterAssignment:
    cluster_id: int
    head: Optional[int]
    members: frozenset[int]

    def __post_init__(self) -> None:
        if self.head is not None and self.head not in self.members:
            raise ClusteringError(f"Head {self.head} of cluster {self.cluster_id} is not among its members.")

    @property
    def headless(self) -> bool:
        return self.head is None


@dataclasses.dataclass(frozen=True)
class CandidateState:
    """What the election needs to know about an alive node this round."""

    node_id: int
    residual: float
    initial: float
    delivery_energy: float
    distance_to_bs: float


def zero_weights(cluster_count: int) -> list[NeuronWeights]:
    return [NeuronWeights(cluster_id, np.zeros(FEATURE_DIMENSION)) for cluster_id in range(cluster_count)]


def build_patterns(
    states: Iterable[CandidateState], diagonal: float, energy_scale: Optional[float] = None
) -> dict[int, InputPattern]:
    """Feature vectors of one cluster's candidates for this round.

    The energy feature is how much more a candidate has spent than the least drained of the given states,
    in units of `energy_scale` (the initial energy when not given) and capped at 1. With the scale set to
    one round of head duty, a head that just served scores about 1 against its rested peers. Delivery
    energy is normalized by the maximum among the given states, distance by the field diagonal.
    """
    states = list(states)
    if not states:
        return {}
    max_delivery = max(state.delivery_energy for state in states)
    least_spent = min(state.initial - state.residual for state in states)
    patterns = {}
    for state in states:
        scale = energy_scale if energy_scale is not None else state.initial
        depletion = (state.initial - state.residual - least_spent) / scale if scale > 0 else 0.0
        delivery = state.delivery_energy / max_delivery if max_delivery > 0 else 0.0
        distance = min(1.0, state.distance_to_bs / diagonal)
        features = np.clip(np.array([depletion, delivery, distance]), 0.0, 1.0)
        patterns[state.node_id] = InputPattern(state.node_id, features)
    return patterns


def winner_score(pattern: InputPattern, weights: NeuronWeights) -> float:
    if pattern.features.shape != weights.weights.shape:
        raise DimensionMismatch("Pattern and neuron dimensionality differ.")
    return float(np.linalg.norm(FEATURE_WEIGHTS * (pattern.features - weights.weights)))


def competitive_winner(candidates: Sequence[InputPattern], weights: NeuronWeights) -> int:
    if not candidates:
        raise NoEligibleCandidates("no eligible candidates")
    return min(candidates, key=lambda pattern: (winner_score(pattern, weights), pattern.node_id)).node_id


def update_weights(weights: np.ndarray, pattern: np.ndarray, mu: LearningRate | float) -> np.ndarray:
    """Move the weights toward the pattern along the line joining them."""
    rate = mu.mu if isinstance(mu, LearningRate) else mu
    weights = np.asarray(weights, dtype=float)
    pattern = np.asarray(pattern, dtype=float)
    if weights.shape != pattern.shape:
        raise DimensionMismatch(f"Cannot update weights of shape {weights.shape} toward {pattern.shape}.")
    if not 0.0 <= rate <= 1.0:
        raise ClusteringError(f"Learning rate {rate} is outside [0, 1].")
    return (1.0 - rate) * weights + rate * pattern


def duty_cost_floor(params: RadioParams, member_count: int, radio_range: float) -> float:
    """Energy a head needs for one round: receive every other member's packet and send one packet at full range.

    A head with members also broadcasts its advertisement at full range first, so that send is counted too.
    """
    receptions = max(0, member_count - 1) * rx_energy(params, params.data_packet_bytes)
    advertisement = tx_energy(params, radio_range, params.header_bytes) if member_count > 1 else 0.0
    return receptions + advertisement + tx_energy(params, radio_range, params.data_packet_bytes)


def elect_cluster_heads(
    clusters: Sequence[Collection[int]],
    patterns: Mapping[int, InputPattern],
    eligible: Collection[int],
    weights: Sequence[NeuronWeights],
    mu: LearningRate | float,
) -> tuple[list[ClusterAssignment], list[NeuronWeights]]:
    """Elect one head per fixed cluster and let the winning neuron learn.

    `patterns` holds the alive nodes; dead members are dropped from their cluster. A cluster with alive
    members but no eligible candidate is returned headless and its neuron is left untouched.
    """
    if len(weights) != len(clusters):
        raise ClusteringError(f"{len(weights)} neurons for {len(clusters)} clusters.")
    assignments: list[ClusterAssignment] = []
    updated = list(weights)
    for cluster_id, members in enumerate(clusters):
        alive = frozenset(node_id for node_id in members if node_id in patterns)
        if not alive:
            continue
        candidates = [patterns[node_id] for node_id in sorted(alive) if node_id in eligible]
        if not candidates:
            logger.debug(f"Cluster {cluster_id} has no eligible head candidate this round.")
            assignments.append(ClusterAssignment(cluster_id, None, alive))
            continue
        winner = competitive_winner(candidates, weights[cluster_id])
        updated[cluster_id] = NeuronWeights(
            cluster_id, update_weights(weights[cluster_id].weights, patterns[winner].features, mu)
        )
        assignments.append(ClusterAssignment(cluster_id, winner, alive))
    return assignments, updated


def regroup_by_nearest_head(
    assignments: Sequence[ClusterAssignment], positions: Mapping[int, Point]
) -> list[ClusterAssignment]:
    """Move every member of a headed cluster to the nearest elected head, ties to the lower head id.

    Heads keep their cluster ids and headless clusters are returned unchanged, so a member never sends
    to a far head of its own cluster while another head sits closer.
    """
    heads = sorted(assignment.head for assignment in assignments if assignment.head is not None)
    groups: dict[int, set[int]] = {head: {head} for head in heads}
    for assignment in assignments:
        if assignment.head is None:
            continue
        for node_id in sorted(assignment.members - set(heads)):
            x, y = positions[node_id]
            nearest = min(heads, key=lambda head: (math.hypot(positions[head][0] - x, positions[head][1] - y), head))
            groups[nearest].add(node_id)
    return [
        assignment
        if assignment.head is None
        else ClusterAssignment(assignment.cluster_id, assignment.head, frozenset(groups[assignment.head]))
        for assignment in assignments
    ]


def leach_epoch_length(p: float) -> int:
    if not 0.0 < p < 1.0:
        raise ClusteringError(f"LEACH probability {p} is outside (0, 1).")
    return max(1, math.ceil(1.0 / p - 1e-9))


def leach_threshold(round_index: int, p: float) -> float:
    return p / (1.0 - p * (round_index % leach_epoch_length(p)))


class LeachRotation:
    """Remembers which nodes already served as head in the current epoch."""

    def __init__(self, p: float):
        self.p = p
        self.epoch_length = leach_epoch_length(p)
        self._served_in_epoch: dict[int, int] = {}

    def epoch_of(self, round_index: int) -> int:
        return round_index // self.epoch_length

    def eligible(self, alive: Iterable[int], round_index: int) -> list[int]:
        epoch = self.epoch_of(round_index)
        return sorted(node_id for node_id in alive if self._served_in_epoch.get(node_id) != epoch)

    def record(self, heads: Iterable[int], round_index: int) -> None:
        epoch = self.epoch_of(round_index)
        for node_id in heads:
            self._served_in_epoch[node_id] = epoch


def leach_elect(round_index: int, p: float, eligible: Iterable[int], rng: UniformSource) -> frozenset[int]:
    """Each eligible node becomes a head when its draw falls under the threshold; draws go in node id order."""
    threshold = leach_threshold(round_index, p)
    return frozenset(node_id for node_id in sorted(eligible) if rng.random() < threshold)


def assign_members(positions: Mapping[int, Point], heads: Iterable[int]) -> list[ClusterAssignment]:
    """Attach every alive node to its nearest head; without heads every node is its own headless cluster."""
    head_ids = sorted(heads)
    missing = [head for head in head_ids if head not in positions]
    if missing:
        raise ClusteringError(f"Heads {missing} are not alive nodes.")
    if not head_ids:
        return [
            ClusterAssignment(cluster_id, None, frozenset({node_id}))
            for cluster_id, node_id in enumerate(sorted(positions))
        ]

    groups: dict[int, set[int]] = {head: {head} for head in head_ids}
    for node_id in sorted(positions):
        if node_id in groups:
            continue
        x, y = positions[node_id]
        nearest = min(head_ids, key=lambda head: (math.hypot(positions[head][0] - x, positions[head][1] - y), head))
        groups[nearest].add(node_id)
    return [
        ClusterAssignment(cluster_id, head, frozenset(groups[head]))
        for cluster_id, head in enumerate(head_ids)
    ]


def form_clusters(
    subregions: Sequence[SubRegion],
    placements: Sequence[SensorPlacement],
    field: FieldConfig,
    grid: FieldGrid,
    cluster_count: int,
) -> list[frozenset[int]]:
    """Group the deployment into fixed clusters.

    Prototypes tiled over the field are trained by competitive learning on the centroids of the covered
    subregions. A node joins the prototype that owns the subregion under its own position, or the nearest
    prototype when it stands in an uncovered spot. Clusters left without nodes are dropped.
    """
    if cluster_count < 1:
        raise ClusteringError("At least one cluster is required.")
    if not placements:
        return []
    scale = np.array([field.width, field.height])
    covered = [region for region in subregions if region.covered]
    centroids = np.array([region.centroid for region in covered]).reshape(-1, 2) / scale

    prototypes = _tiled_prototypes(min(cluster_count, max(1, len(covered))))
    rate = FORMATION_RATE
    for _ in range(FORMATION_EPOCHS):
        for centroid in centroids:
            winner = _nearest_prototype(prototypes, centroid)
            prototypes[winner] = update_weights(prototypes[winner], centroid, rate)
        rate *= FORMATION_RATE_DECAY

    region_of_point = np.full(grid.size, -1, dtype=int)
    for region in subregions:
        region_of_point[region.point_indices] = region.region_id
    group_of_region = {
        region.region_id: _nearest_prototype(prototypes, centroid) for region, centroid in zip(covered, centroids)
    }

    groups: dict[int, set[int]] = {}
    for placement in placements:
        region_id = int(region_of_point[grid.index_of(placement.position)])
        group = group_of_region.get(region_id)
        if group is None:
            group = _nearest_prototype(prototypes, np.array(placement.position) / scale)
        groups.setdefault(group, set()).add(placement.node_id)
    clusters = [frozenset(groups[group]) for group in sorted(groups)]
    logger.debug(f"Formed {len(clusters)} fixed clusters from {len(covered)} covered subregions.")
    return clusters


def _tiled_prototypes(count: int) -> np.ndarray:
    side = math.ceil(math.sqrt(count))
    tiles = [((i % side + 0.5) / side, (i // side + 0.5) / side) for i in range(count)]
    return np.array(tiles, dtype=float)


def _nearest_prototype(prototypes: np.ndarray, point: np.ndarray) -> int:
    return int(np.argmin(np.linalg.norm(prototypes - point, axis=1)))
