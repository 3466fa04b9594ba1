from __future__ import annotations
from typing import Callable, Optional
import logging
import os

from wsn_routing.clustering import ClusteringError
from wsn_routing.energy_model import EnergyModelError
from wsn_routing.field_model import FieldModelError
from wsn_routing.logs import LOGGER_NAME
from wsn_routing.metrics_report import (
    emit_csv,
    emit_sweep_raw_csv,
    format_summary,
    summarize,
    sweep,
    write_text,
)
from wsn_routing.reports import ReportError
from wsn_routing.routing import RoutingError, dump_tables
from wsn_routing.routing_metric import RoutingMetricError
from wsn_routing.script_args import ConfigError, RunManifest, ScenarioConfig, ensure_output_dir, parse_config
from wsn_routing.script_args.configs import PROTOCOLS
from wsn_routing.simulation import SimulationError, check_constraints, simulate


EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2

_MODULE_ERRORS = (
    ConfigError,
    FieldModelError,
    EnergyModelError,
    RoutingMetricError,
    ClusteringError,
    RoutingError,
    SimulationError,
    ReportError,
    OSError,
    ValueError,
)


logger = logging.getLogger(LOGGER_NAME)


def series_file_name(config: ScenarioConfig) -> str:
    return f"{config.scenario.label}_{config.protocol.name}_{config.seeds.placement}.csv"


def cmd_run(manifest: RunManifest, config: Optional[ScenarioConfig] = None) -> int:
    """Run one scenario; writes its time series, its summary and optionally the deployment tables."""
    def run(config: ScenarioConfig, output_dir: str) -> int:
        state, series = simulate(config)
        emit_csv(series, os.path.join(output_dir, series_file_name(config)))
        label = config.scenario.label
        write_text(os.path.join(output_dir, f"{label}_summary.txt"), format_summary(summarize(series, config)))
        if config.routing.dump_tables:
            tables_path = os.path.join(output_dir, f"{label}_{config.protocol.name}_tables.txt")
            write_text(tables_path, dump_tables(state.initial_tables))
        return EXIT_OK

    return _execute_guarded("run", manifest, config, run)


def cmd_compare(manifest: RunManifest, config: Optional[ScenarioConfig] = None) -> int:
    """Run every protocol on the same deployment and write one series per protocol plus a joint summary."""
    def compare(config: ScenarioConfig, output_dir: str) -> int:
        lines = []
        for protocol in PROTOCOLS:
            protocol_config = config.with_value("protocol.name", protocol)
            _, series = simulate(protocol_config)
            emit_csv(series, os.path.join(output_dir, series_file_name(protocol_config)))
            summary = summarize(series, protocol_config)
            logger.info(f"{protocol}: first node died in round {summary.first_death_round}, PDF {summary.pdf}.")
            lines.append(format_summary(summary, prefix=f"{protocol}."))
        write_text(os.path.join(output_dir, f"{config.scenario.label}_compare_summary.txt"), "".join(lines))
        return EXIT_OK

    return _execute_guarded("compare", manifest, config, compare)


def cmd_sweep(manifest: RunManifest, config: Optional[ScenarioConfig] = None) -> int:
    """Sweep the configured knob over its values and seeds; writes the aggregate and the per-seed CSV."""
    def run_sweep(config: ScenarioConfig, output_dir: str) -> int:
        result = sweep(
            config,
            config.sweep.values,
            config.sweep.seeds,
            knob=config.sweep.knob,
            jobs=manifest.parallel_replications,
        )
        stem = f"{config.scenario.label}_{config.protocol.name}_sweep"
        emit_csv(result, os.path.join(output_dir, stem + ".csv"))
        emit_sweep_raw_csv(result, os.path.join(output_dir, stem + "_raw.csv"))
        return EXIT_OK

    return _execute_guarded("sweep", manifest, config, run_sweep)


def cmd_validate(manifest: RunManifest, config: Optional[ScenarioConfig] = None) -> int:
    """Run one scenario and check it against the energy, power, flow and coverage constraints."""
    def validate(config: ScenarioConfig, output_dir: str) -> int:
        state, series = simulate(config)
        emit_csv(series, os.path.join(output_dir, series_file_name(config)))
        violations = check_constraints(state)
        report = "".join(f"{violation}\n" for violation in violations)
        write_text(os.path.join(output_dir, f"{config.scenario.label}_violations.txt"), report)
        if violations:
            for violation in violations:
                logger.error(f"Constraint violated: {violation}")
            return EXIT_VIOLATIONS
        logger.info(f"No constraint violations in {len(series)} rounds.")
        return EXIT_OK

    return _execute_guarded("validate", manifest, config, validate)


COMMAND_HANDLERS: dict[str, Callable[[RunManifest, Optional[ScenarioConfig]], int]] = {
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def execute(manifest: RunManifest, config: Optional[ScenarioConfig] = None) -> int:
    handler = COMMAND_HANDLERS.get(manifest.command)
    if handler is None:
        logger.error(f"Unknown command '{manifest.command}'.")
        return EXIT_ERROR
    return handler(manifest, config)


def _execute_guarded(
    name: str,
    manifest: RunManifest,
    config: Optional[ScenarioConfig],
    body: Callable[[ScenarioConfig, str], int],
) -> int:
    try:
        if config is None:
            config = parse_config(manifest.config_path, manifest.overrides)
        output_dir = ensure_output_dir(manifest.output_dir)
        return body(config, output_dir)
    except _MODULE_ERRORS as e:
        logger.error(f"Command '{name}' failed (config '{manifest.config_path}'): {e}")
        return EXIT_ERROR
