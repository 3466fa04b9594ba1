"""Coverage-aware link cost and additive path cost.

A link costs the energy spent per delivered packet over the energy of a single attempt, divided by the
sender's coverage area. Lower is better.
"""
from __future__ import annotations
from typing import Sequence
import dataclasses

from wsn_routing.energy_model import rx_energy, tx_energy
from wsn_routing.script_args.configs import RadioParams


class RoutingMetricError(Exception):
    pass


class DegenerateLink(RoutingMetricError):
    pass


@dataclasses.dataclass(frozen=True)
class LinkCost:
    sender: int
    receiver: int
    delivery_energy: float
    tx: float
    rx: float
    coverage_area: float
    value: float

    def __post_init__(self) -> None:
        if self.tx <= 0 or self.rx < 0 or self.coverage_area <= 0 or self.value <= 0:
            raise DegenerateLink(f"degenerate link {self.sender}->{self.receiver}")


@dataclasses.dataclass(frozen=True)
class PathCost:
    hops: tuple[int, ...]
    total: float

    def __post_init__(self) -> None:
        if len(set(self.hops)) != len(self.hops):
            raise RoutingMetricError(f"Path {self.hops} revisits a node.")
        if self.total < 0:
            raise RoutingMetricError("Path cost must be non-negative.")


def link_cost(delivery_energy: float, tx: float, rx: float, coverage_area: float) -> float:
    if tx + rx <= 0 or coverage_area <= 0:
        raise DegenerateLink("degenerate link")
    if delivery_energy < 0:
        raise RoutingMetricError("Delivery energy must be non-negative.")
    return delivery_energy / ((tx + rx) * coverage_area)


def delivery_energy(tx: float, rx: float, delivery_ratio: float = 1.0) -> float:
    """Energy spent on a link per delivered packet: one attempt costs tx + rx, 1/ratio attempts are needed."""
    if not 0 < delivery_ratio <= 1:
        raise RoutingMetricError(f"Delivery ratio {delivery_ratio} is outside (0, 1].")
    return (tx + rx) / delivery_ratio


def make_link_cost(
    sender: int,
    receiver: int,
    params: RadioParams,
    distance: float,
    coverage_area: float,
    delivery_ratio: float = 1.0,
) -> LinkCost:
    tx = tx_energy(params, distance, params.data_packet_bytes)
    rx = rx_energy(params, params.data_packet_bytes)
    energy = delivery_energy(tx, rx, delivery_ratio)
    return LinkCost(
        sender=sender,
        receiver=receiver,
        delivery_energy=energy,
        tx=tx,
        rx=rx,
        coverage_area=coverage_area,
        value=link_cost(energy, tx, rx, coverage_area),
    )


def accumulate_path_cost(prefix_cost: float, link: LinkCost) -> float:
    if prefix_cost < 0:
        raise RoutingMetricError("Prefix cost must be non-negative.")
    return prefix_cost + link.value


def path_cost(links: Sequence[LinkCost]) -> PathCost:
    if not links:
        raise RoutingMetricError("A path needs at least one link.")
    total = 0.0
    hops = [links[0].sender]
    for link in links:
        if link.sender != hops[-1]:
            raise RoutingMetricError(f"Link {link.sender}->{link.receiver} does not continue the path at {hops[-1]}.")
        total = accumulate_path_cost(total, link)
        hops.append(link.receiver)
    return PathCost(hops=tuple(hops), total=total)


def packet_energy(per_bit_energies: Sequence[float], packet_bits: int) -> float:
    """Energy of sending one packet of `packet_bits` along each of the given paths."""
    if packet_bits <= 0:
        raise RoutingMetricError("Packet size must be positive.")
    if any(energy < 0 for energy in per_bit_energies):
        raise RoutingMetricError("Per-bit energies must be non-negative.")
    return sum(per_bit_energies) * packet_bits
