from __future__ import annotations
import dataclasses


class ReportError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class RoundReport:
    """State of the network at the start of a round plus the traffic carried during it.

    Packet counts are counted in readings: an aggregated packet carrying k readings counts k times.
    """

    round_index: int
    alive_count: int
    mean_residual: float
    packets_generated: int
    packets_delivered: int
    coverage_ratio_now: float
    ch_ids: frozenset[int] = frozenset()
    network_dead: bool = False

    def __post_init__(self) -> None:
        if self.packets_delivered > self.packets_generated:
            raise ReportError(
                f"Round {self.round_index} delivered {self.packets_delivered} of {self.packets_generated} packets."
            )

    @property
    def ch_count(self) -> int:
        return len(self.ch_ids)


@dataclasses.dataclass(frozen=True)
class TimeSeries:
    scenario_label: str
    reports: tuple[RoundReport, ...] = ()

    def __post_init__(self) -> None:
        for expected, report in enumerate(self.reports):
            if report.round_index != expected:
                raise ReportError(
                    f"Series '{self.scenario_label}' has round {report.round_index} at position {expected}."
                )
        for report in self.reports[:-1]:
            if report.network_dead:
                raise ReportError(
                    f"Series '{self.scenario_label}' goes on after the network died in round {report.round_index}."
                )

    def __len__(self) -> int:
        return len(self.reports)
