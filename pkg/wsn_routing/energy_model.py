"""First-order radio energy accounting.

Transmitting k bytes over d meters costs (e_elect + e_amp * d**rho) * 8k joules, receiving them costs
e_elect * 8k, and a neighbor that only decodes the header of an overheard packet pays e_elect * header_bits.
"""
from __future__ import annotations
import dataclasses

from wsn_routing.script_args.configs import RadioParams


BITS_PER_BYTE = 8


class EnergyModelError(Exception):
    pass


class ReceiverCountExceedsNeighborhood(EnergyModelError):
    pass


class ChargeOnDeadNode(EnergyModelError):
    pass


@dataclasses.dataclass(frozen=True)
class EnergyLedger:
    node_id: int
    initial: float
    residual: float
    alive: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.residual <= self.initial:
            raise EnergyModelError(
                f"Ledger of node {self.node_id} has residual {self.residual} outside [0, {self.initial}]."
            )
        if self.alive != (self.residual > 0.0):
            raise EnergyModelError(f"Ledger of node {self.node_id} is alive iff its residual is positive.")

    @property
    def spent(self) -> float:
        return self.initial - self.residual


def new_ledger(node_id: int, initial: float) -> EnergyLedger:
    return EnergyLedger(node_id=node_id, initial=initial, residual=initial, alive=initial > 0.0)


def tx_energy(params: RadioParams, distance: float, payload_bytes: float) -> float:
    if distance < 0 or payload_bytes < 0:
        raise EnergyModelError("Distance and payload size must be non-negative.")
    return (params.e_elect + params.e_amp * distance**params.rho) * BITS_PER_BYTE * payload_bytes


def rx_energy(params: RadioParams, payload_bytes: float) -> float:
    if payload_bytes < 0:
        raise EnergyModelError("Payload size must be non-negative.")
    return params.e_elect * BITS_PER_BYTE * payload_bytes


def header_rx_energy(params: RadioParams) -> float:
    """Energy spent by a neighbor that decodes only the header of a packet addressed to someone else."""
    return params.e_elect * params.header_bits


def broadcast_energy(
    params: RadioParams,
    distance: float,
    payload_bytes: float,
    intended_receivers: int,
    neighbors_in_range: int,
) -> float:
    """Total energy of one transmission event, summed over the sender and its whole neighborhood.

    The sender pays the transmission, each of the `intended_receivers` pays a full reception and the
    remaining neighbors pay header decoding only.
    """
    if intended_receivers < 0 or neighbors_in_range < 0:
        raise EnergyModelError("Receiver counts must be non-negative.")
    if intended_receivers > neighbors_in_range:
        raise ReceiverCountExceedsNeighborhood(
            f"receiver count exceeds neighborhood ({intended_receivers} > {neighbors_in_range})"
        )
    return (
        tx_energy(params, distance, payload_bytes)
        + intended_receivers * rx_energy(params, payload_bytes)
        + (neighbors_in_range - intended_receivers) * header_rx_energy(params)
    )


def charge(ledger: EnergyLedger, amount: float) -> EnergyLedger:
    """Debit `amount` joules from the ledger, clamping the residual at zero.

    A ledger whose residual reaches zero is dead; charging it again signals a simulator bug.
    """
    if amount < 0:
        raise EnergyModelError(f"Cannot charge a negative amount ({amount}) to node {ledger.node_id}.")
    if not ledger.alive:
        raise ChargeOnDeadNode(f"charge on dead node {ledger.node_id}")
    residual = max(0.0, ledger.residual - amount)
    return dataclasses.replace(ledger, residual=residual, alive=residual > 0.0)
