import dataclasses
from typing import Any, Optional
import argparse
import json
import logging
import os

import pydantic

from wsn_routing.script_args.configs import ScenarioConfig as _ScenarioConfig


COMMANDS = ("run", "compare", "sweep", "validate")


class ConfigError(Exception):
    pass


class ConfigFileNotFound(ConfigError):
    pass


@dataclasses.dataclass(frozen=True)
class RunManifest:
    config_path: str
    output_dir: str
    command: str
    overrides: tuple[str, ...] = ()
    parallel_replications: int = 1


@dataclasses.dataclass(frozen=True)
class ScriptArgs:
    manifest: RunManifest
    config: _ScenarioConfig


def request_and_get_script_arguments(script_description: str, argv: Optional[list[str]] = None) -> ScriptArgs:
    """Create base for the script.

    `script_description` is the summary of the script's purpose shown as the first part of the script's help.

    The script then returns ScriptArgs which contains
    - `manifest` describing the requested command, config file, output directory, overrides and job count,
    - `config` which is the scenario configuration with all `--set` overrides applied.

    Raises error if
    - the configuration file is not found or not valid,
    - an override references a key missing from the configuration schema.
    """
    parser = _new_arg_parser(script_description)
    _add_command_arg_to_parser(parser)
    _add_config_arg_to_parser(parser)
    _add_run_options_to_parser(parser)
    return _parse_arguments(parser, argv)


def _new_arg_parser(script_description: str) -> argparse.ArgumentParser:
    return argparse.ArgumentParser(description=script_description)


def _add_command_arg_to_parser(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("command", choices=COMMANDS, help="The experiment to perform.")


def _add_config_arg_to_parser(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, required=True, help="The path to the scenario config file.")


def _add_run_options_to_parser(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=str, required=True, help="Directory receiving the CSV and summary files.")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value, e.g. radio.rho=4. May be repeated.",
    )
    parser.add_argument("--jobs", type=int, default=1, help="Number of parallel scenario replications.")


def _parse_arguments(parser: argparse.ArgumentParser, argv: Optional[list[str]]) -> ScriptArgs:
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be a positive integer")
    manifest = RunManifest(
        config_path=args.config,
        output_dir=args.out,
        command=args.command,
        overrides=tuple(args.overrides),
        parallel_replications=args.jobs,
    )
    try:
        config = parse_config(manifest.config_path, manifest.overrides)
        return ScriptArgs(manifest, config)
    except ConfigFileNotFound as e:
        logging.error(f"Configuration file not found. {e}")
        raise
    except Exception as e:
        logging.error(f"Check the configuration file ('{manifest.config_path}'). {e}")
        raise


def parse_config(path: str, overrides: tuple[str, ...] | list[str] = ()) -> _ScenarioConfig:
    """Load the scenario config file at `path`, apply `key=value` overrides and validate the result.

    Keys missing from the file take their defaults. Unknown keys, malformed JSON and out-of-range
    values raise ConfigError naming the offending key (and its line in the file when it appears there).
    """
    text = _read_config_text(path)
    document = _decode_config_text(path, text)
    for override in overrides:
        _apply_override(document, override)
    return _validate_config(path, text, document)


def load_config_file(path: str) -> dict[str, Any]:
    return _decode_config_text(path, _read_config_text(path))


def _read_config_text(path: str) -> str:
    try:
        with open(path) as config_file:
            return config_file.read()
    except FileNotFoundError:
        raise ConfigFileNotFound(f"Could not load config file from path '{path}'.")
    except OSError as e:
        raise ConfigError(f"Error when reading the config file '{path}': {e}")


def _decode_config_text(path: str, text: str) -> dict[str, Any]:
    if not text.strip():
        return {}
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed config file '{path}' at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(document, dict):
        raise ConfigError(f"Config file '{path}' must contain a JSON object at the top level.")
    return document


def _apply_override(document: dict[str, Any], override: str) -> None:
    if "=" not in override:
        raise ConfigError(f"Override '{override}' is not of the form key=value.")
    key, raw_value = (part.strip() for part in override.split("=", 1))
    path = key.split(".")
    if not _schema_has_key(path):
        raise ConfigError(f"Override references unknown key '{key}'.")
    node = document
    for part in path[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"Override '{key}' conflicts with the non-section value at '{part}'.")
        node = child
    node[path[-1]] = _parse_override_value(raw_value)


def _parse_override_value(raw_value: str) -> Any:
    try:
        return json.loads(raw_value)
    except json.JSONDecodeError:
        return raw_value


def _schema_has_key(path: list[str]) -> bool:
    model: Any = _ScenarioConfig
    for part in path:
        if not (isinstance(model, type) and issubclass(model, pydantic.BaseModel)):
            return False
        if part not in model.model_fields:
            return False
        model = model.model_fields[part].annotation
    return True


def _validate_config(path: str, text: str, document: dict[str, Any]) -> _ScenarioConfig:
    try:
        return _ScenarioConfig(**document)
    except pydantic.ValidationError as e:
        problems = [_describe_validation_error(error, text) for error in e.errors()]
        raise ConfigError(f"Invalid config file '{path}': " + "; ".join(problems))


def _describe_validation_error(error: Any, text: str) -> str:
    key = ".".join(str(part) for part in error["loc"])
    line = _key_line(text, str(error["loc"][-1])) if error["loc"] else None
    where = f" (line {line})" if line is not None else ""
    if error["type"] == "extra_forbidden":
        return f"unknown key '{key}'{where}"
    return f"'{key}'{where}: {error['msg']}"


def _key_line(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def ensure_output_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
