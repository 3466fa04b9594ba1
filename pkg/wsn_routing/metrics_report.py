"""Scenario summaries, knob sweeps and their CSV/text serialization."""
from __future__ import annotations
from typing import Any, Iterable, Optional, Sequence
import concurrent.futures
import csv
import dataclasses
import logging
import statistics

from wsn_routing.logs import LOGGER_NAME
from wsn_routing.reports import ReportError, RoundReport, TimeSeries
from wsn_routing.script_args.configs import ScenarioConfig
from wsn_routing.simulation import run_scenario


SERIES_COLUMNS = ("round", "alive", "mean_residual_J", "generated", "delivered", "coverage_ratio", "ch_count")
SWEEP_METRICS = (
    "alive_at_checkpoint",
    "pdf",
    "pdf_before_first_death",
    "mean_residual_at_checkpoint",
    "first_death_round",
)
UNDEFINED = "undefined"
KNOB_ALIASES = {
    "coverage_ratio": "protocol.coverage_ratio",
    "rho": "radio.rho",
    "alpha": "routing.alpha",
    "mu": "protocol.mu",
}


logger = logging.getLogger(LOGGER_NAME)


class EmptyWindow(ReportError):
    pass


class UnwritablePath(ReportError):
    pass


@dataclasses.dataclass(frozen=True)
class CheckpointRead:
    value: float
    clamped: bool


@dataclasses.dataclass(frozen=True)
class ScenarioSummary:
    label: str
    protocol: str
    seed: int
    rounds: int
    first_death_round: Optional[int]
    last_death_round: Optional[int]
    pdf: Optional[float]
    pdf_before_first_death: Optional[float]
    checkpoint_round: int
    alive_at_checkpoint: Optional[int]
    mean_residual_at_checkpoint: Optional[float]
    checkpoint_clamped: bool

    def metric(self, name: str) -> Optional[float]:
        return getattr(self, name)


@dataclasses.dataclass(frozen=True)
class SweepPoint:
    knob_value: float
    summaries: tuple[ScenarioSummary, ...]

    def values(self, metric: str) -> list[float]:
        return [value for value in (summary.metric(metric) for summary in self.summaries) if value is not None]

    def mean(self, metric: str) -> Optional[float]:
        values = self.values(metric)
        return statistics.fmean(values) if values else None

    def minimum(self, metric: str) -> Optional[float]:
        values = self.values(metric)
        return min(values) if values else None

    def maximum(self, metric: str) -> Optional[float]:
        values = self.values(metric)
        return max(values) if values else None


@dataclasses.dataclass(frozen=True)
class SweepResult:
    knob_name: str
    knob_values: tuple[float, ...]
    seeds: tuple[int, ...]
    points: tuple[SweepPoint, ...]

    def __post_init__(self) -> None:
        if len(self.points) != len(self.knob_values):
            raise ReportError("A sweep needs exactly one point per knob value.")
        if any(not point.summaries for point in self.points):
            raise ReportError("Every sweep point aggregates at least one seed.")

    @property
    def seeds_per_point(self) -> int:
        return len(self.seeds)


def pdf(series: TimeSeries, window: range) -> Optional[float]:
    """Delivered over generated readings in the window; None when nothing was generated."""
    if window.step != 1:
        raise ReportError("The window must be a contiguous round range.")
    if len(window) == 0:
        raise EmptyWindow("empty window")
    if window.start < 0 or window.stop > len(series):
        raise ReportError(f"Window {window.start}..{window.stop} lies outside the {len(series)} reported rounds.")
    reports = series.reports[window.start : window.stop]
    generated = sum(report.packets_generated for report in reports)
    delivered = sum(report.packets_delivered for report in reports)
    return delivered / generated if generated else None


def alive_at(series: TimeSeries, round_index: int) -> CheckpointRead:
    report, clamped = _report_at(series, round_index)
    return CheckpointRead(report.alive_count, clamped)


def mean_residual_at(series: TimeSeries, round_index: int) -> CheckpointRead:
    report, clamped = _report_at(series, round_index)
    return CheckpointRead(report.mean_residual, clamped)


def _report_at(series: TimeSeries, round_index: int) -> tuple[RoundReport, bool]:
    if not series.reports:
        raise ReportError(f"Series '{series.scenario_label}' has no rounds to read.")
    if round_index < 0:
        raise ReportError(f"Round {round_index} is negative.")
    if round_index < len(series):
        return series.reports[round_index], False
    logger.warning(
        f"Round {round_index} lies beyond the {len(series)} rounds of '{series.scenario_label}', "
        f"reading round {len(series) - 1} instead."
    )
    return series.reports[-1], True


def summarize(series: TimeSeries, config: ScenarioConfig) -> ScenarioSummary:
    """Lifetime, delivery and checkpoint figures of one scenario.

    A node counts as dead in round r when the report of round r + 1 no longer has it alive.
    """
    node_count = config.nodes.count
    first_short = next((report.round_index for report in series.reports if report.alive_count < node_count), None)
    all_dead = next((report.round_index for report in series.reports if report.alive_count == 0), None)
    first_death = first_short - 1 if first_short is not None else None

    overall = pdf(series, range(len(series))) if len(series) else None
    if first_death is None:
        before_first_death = overall
    elif first_death > 0:
        before_first_death = pdf(series, range(first_death))
    else:
        before_first_death = None

    checkpoint = config.checkpoint_round
    alive: Optional[int] = None
    residual: Optional[float] = None
    clamped = False
    if len(series):
        alive_read = alive_at(series, checkpoint)
        alive, clamped = int(alive_read.value), alive_read.clamped
        residual = mean_residual_at(series, checkpoint).value
    return ScenarioSummary(
        label=config.scenario.label,
        protocol=config.protocol.name,
        seed=config.seeds.placement,
        rounds=len(series),
        first_death_round=first_death,
        last_death_round=all_dead - 1 if all_dead is not None else None,
        pdf=overall,
        pdf_before_first_death=before_first_death,
        checkpoint_round=checkpoint,
        alive_at_checkpoint=alive,
        mean_residual_at_checkpoint=residual,
        checkpoint_clamped=clamped,
    )


def resolve_knob(knob: str) -> str:
    return KNOB_ALIASES.get(knob, knob)


def replication_config(base_config: ScenarioConfig, knob: str, value: float, seed: int) -> ScenarioConfig:
    """The scenario of one sweep cell: the knob set to `value`, both seeds set to `seed`."""
    config = base_config.with_value(resolve_knob(knob), value)
    return config.with_value("seeds.placement", seed).with_value("seeds.rng", seed)


def run_and_summarize(config: ScenarioConfig) -> ScenarioSummary:
    return summarize(run_scenario(config), config)


def sweep(
    base_config: ScenarioConfig,
    knob_values: Sequence[float],
    seeds: Sequence[int],
    knob: Optional[str] = None,
    jobs: int = 1,
) -> SweepResult:
    """Run every (knob value, seed) pair and group the summaries per knob value.

    Replications may run in a process pool; results are ordered by value and seed, never by completion.
    """
    if not knob_values or not seeds:
        raise ReportError("A sweep needs at least one knob value and one seed.")
    knob = resolve_knob(knob or base_config.sweep.knob)
    configs = [replication_config(base_config, knob, value, seed) for value in knob_values for seed in seeds]
    logger.info(f"Sweeping {knob} over {list(knob_values)} with seeds {list(seeds)} ({len(configs)} runs).")
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(run_and_summarize, configs))
    else:
        summaries = [run_and_summarize(config) for config in configs]

    per_value = len(seeds)
    points = tuple(
        SweepPoint(value, tuple(summaries[i * per_value : (i + 1) * per_value])) for i, value in enumerate(knob_values)
    )
    return SweepResult(knob, tuple(knob_values), tuple(seeds), points)


def emit_csv(result: TimeSeries | SweepResult, path: str) -> None:
    """Write a time series or a sweep aggregate as CSV (header row, LF endings, 9 significant digits)."""
    if isinstance(result, TimeSeries):
        rows = [SERIES_COLUMNS] + [_series_row(report) for report in result.reports]
    else:
        header = ["knob", "value", "seeds"]
        for metric in SWEEP_METRICS:
            header += [f"{metric}_mean", f"{metric}_min", f"{metric}_max"]
        rows = [tuple(header)] + [_sweep_row(result.knob_name, point, len(result.seeds)) for point in result.points]
    _write_rows(path, rows)


def emit_sweep_raw_csv(result: SweepResult, path: str) -> None:
    """Per-seed values behind a sweep aggregate."""
    rows: list[Sequence[Any]] = [("knob", "value", "seed", *SWEEP_METRICS)]
    for point in result.points:
        for summary in point.summaries:
            rows.append(
                (result.knob_name, format_value(point.knob_value), summary.seed)
                + tuple(format_value(summary.metric(metric)) for metric in SWEEP_METRICS)
            )
    _write_rows(path, rows)


def load_series_rows(path: str) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as csv_file:
        return list(csv.DictReader(csv_file))


def format_summary(summary: ScenarioSummary, prefix: str = "") -> str:
    """`name=value` lines of a summary, optionally prefixed (e.g. by the protocol in a comparison)."""
    fields = {
        "protocol": summary.protocol,
        "seed": summary.seed,
        "rounds": summary.rounds,
        "first_death_round": summary.first_death_round,
        "last_death_round": summary.last_death_round,
        "pdf": summary.pdf,
        "pdf_before_first_death": summary.pdf_before_first_death,
        "checkpoint_round": summary.checkpoint_round,
        "alive_at_checkpoint": summary.alive_at_checkpoint,
        "mean_residual_at_checkpoint_J": summary.mean_residual_at_checkpoint,
        "checkpoint_clamped": str(summary.checkpoint_clamped).lower(),
    }
    return "".join(f"{prefix}{name}={format_value(value)}\n" for name, value in fields.items())


def write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as text_file:
            text_file.write(text)
    except OSError as e:
        raise UnwritablePath(f"Cannot write '{path}': {e}")
    logger.info(f"Written {path}.")


def format_value(value: Any) -> str:
    if value is None:
        return UNDEFINED
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _series_row(report: RoundReport) -> tuple[str, ...]:
    return (
        str(report.round_index),
        str(report.alive_count),
        format_value(report.mean_residual),
        str(report.packets_generated),
        str(report.packets_delivered),
        format_value(report.coverage_ratio_now),
        str(report.ch_count),
    )


def _sweep_row(knob: str, point: SweepPoint, seeds: int) -> tuple[str, ...]:
    cells = [knob, format_value(point.knob_value), str(seeds)]
    for metric in SWEEP_METRICS:
        cells += [
            format_value(_as_float(point.mean(metric))),
            format_value(_as_float(point.minimum(metric))),
            format_value(_as_float(point.maximum(metric))),
        ]
    return tuple(cells)


def _as_float(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value)


def _write_rows(path: str, rows: Iterable[Sequence[Any]]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as csv_file:
            writer = csv.writer(csv_file, lineterminator="\n")
            writer.writerows(rows)
    except OSError as e:
        raise UnwritablePath(f"Cannot write '{path}': {e}")
    logger.info(f"Written {path}.")
