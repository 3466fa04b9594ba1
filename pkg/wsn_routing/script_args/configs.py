from __future__ import annotations
from typing import Any, Literal, Optional
import math

import pydantic


LoggingLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
ProtocolName = Literal["proposed", "leach"]
RebuildPolicy = Literal["on_change", "every_round"]

PROTOCOLS: tuple[str, ...] = ("proposed", "leach")
REFERENCE_INITIAL_ENERGY = 5.0
REFERENCE_CHECKPOINT_ROUND = 1500


class _Section(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")


class ScenarioConfig(_Section):
    logging: Logging = pydantic.Field(default_factory=lambda: Logging())
    scenario: Scenario = pydantic.Field(default_factory=lambda: Scenario())
    field: FieldConfig = pydantic.Field(default_factory=lambda: FieldConfig())
    nodes: Nodes = pydantic.Field(default_factory=lambda: Nodes())
    radio: RadioParams = pydantic.Field(default_factory=lambda: RadioParams())
    protocol: Protocol = pydantic.Field(default_factory=lambda: Protocol())
    routing: Routing = pydantic.Field(default_factory=lambda: Routing())
    seeds: Seeds = pydantic.Field(default_factory=lambda: Seeds())
    sweep: Sweep = pydantic.Field(default_factory=lambda: Sweep())

    @property
    def radio_range(self) -> float:
        """Radio range in meters, derived from the sensing range and the coverage-ratio knob."""
        return self.nodes.sensing_range * self.protocol.coverage_ratio

    @property
    def checkpoint_round(self) -> int:
        """The alive-node checkpoint, scaled with the initial energy (1500 rounds at 5 J)."""
        scaled = REFERENCE_CHECKPOINT_ROUND * self.nodes.initial_energy / REFERENCE_INITIAL_ENERGY
        return max(1, int(round(scaled)))

    def with_value(self, key: str, value: Any) -> ScenarioConfig:
        """Copy of the config with the dotted `section.key` set to `value`, validated again."""
        document = self.model_dump()
        section, _, name = key.partition(".")
        if not isinstance(document.get(section), dict) or name not in document[section]:
            raise ValueError(f"unknown key '{key}'")
        current = document[section][name]
        if isinstance(current, int) and not isinstance(current, bool) and isinstance(value, float) and value.is_integer():
            value = int(value)
        document[section][name] = value
        return ScenarioConfig.model_validate(document)

    @property
    def cluster_count(self) -> int:
        if self.protocol.cluster_count is not None:
            return self.protocol.cluster_count
        return max(1, int(round(self.protocol.leach_p * self.nodes.count)))


class Logging(_Section):
    console: HandlerConfig = pydantic.Field(default_factory=lambda: Logging.HandlerConfig(level="INFO", use=True))
    file: HandlerConfig = pydantic.Field(
        default_factory=lambda: Logging.HandlerConfig(level="DEBUG", use=False, path="./log/")
    )

    class HandlerConfig(pydantic.BaseModel):
        model_config = pydantic.ConfigDict(extra="forbid")

        level: LoggingLevel
        use: bool
        path: str = ""

        @pydantic.field_validator("level", mode="before")
        @classmethod
        def validate_level(cls, level: str) -> str:
            return level.upper()


class Scenario(_Section):
    label: str = pydantic.Field(default="reference", pattern=r"^[A-Za-z0-9_.-]+$")


class FieldConfig(_Section):
    width: pydantic.PositiveFloat = 400.0
    height: pydantic.PositiveFloat = 400.0
    grid_resolution: Optional[pydantic.PositiveFloat] = None
    bs_x: Optional[float] = None
    bs_y: Optional[float] = None
    plan_covers: bool = False
    plan_limit: pydantic.PositiveInt = 100

    @pydantic.model_validator(mode="after")
    def check_geometry(self) -> FieldConfig:
        if self.resolution > min(self.width, self.height) / 10:
            raise ValueError(
                f"grid_resolution {self.resolution} exceeds a tenth of the shorter field side"
            )
        x, y = self.bs_position
        if not (0.0 <= x <= self.width and 0.0 <= y <= self.height):
            raise ValueError(f"base station position ({x}, {y}) lies outside the field")
        return self

    @property
    def resolution(self) -> float:
        """Meters per grid cell; defaults to a 200-cell-wide grid, at least ten cells across the shorter side."""
        if self.grid_resolution is not None:
            return self.grid_resolution
        return min(self.width / 200, min(self.width, self.height) / 10)

    @property
    def bs_position(self) -> tuple[float, float]:
        x = self.bs_x if self.bs_x is not None else self.width / 2
        y = self.bs_y if self.bs_y is not None else self.height / 2
        return (x, y)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


class Nodes(_Section):
    count: pydantic.PositiveInt = 500
    sensing_range: pydantic.PositiveFloat = 60.0
    initial_energy: pydantic.PositiveFloat = 5.0


class RadioParams(_Section):
    e_elect: pydantic.PositiveFloat = 70e-9
    e_amp: pydantic.NonNegativeFloat = 120e-12
    rho: Literal[2, 4] = 2
    header_bits: pydantic.PositiveInt = 20
    data_packet_bits: pydantic.PositiveInt = 4096
    overhearing: bool = True

    @property
    def data_packet_bytes(self) -> float:
        return self.data_packet_bits / 8

    @property
    def header_bytes(self) -> float:
        return self.header_bits / 8


class Protocol(_Section):
    name: ProtocolName = "proposed"
    rounds_max: pydantic.NonNegativeInt = 5000
    coverage_ratio: float = pydantic.Field(default=1.0, ge=1.0)
    mu: float = pydantic.Field(default=0.1, ge=0.0, le=1.0)
    mu_decay: float = pydantic.Field(default=1.0, gt=0.0, le=1.0)
    leach_p: float = pydantic.Field(default=0.05, gt=0.0, lt=1.0)
    cluster_count: Optional[pydantic.PositiveInt] = None
    aggregate: bool = True
    p_maximum: Optional[pydantic.PositiveFloat] = None

    @pydantic.field_validator("name", mode="before")
    @classmethod
    def validate_name(cls, name: str) -> str:
        normalized = str(name).lower()
        if normalized not in PROTOCOLS:
            raise ValueError(f"unknown protocol '{name}', expected one of {', '.join(PROTOCOLS)}")
        return normalized


class Routing(_Section):
    alpha: float = pydantic.Field(default=2.0, ge=1.0)
    delivery_ratio: float = pydantic.Field(default=1.0, gt=0.0, le=1.0)
    rebuild: RebuildPolicy = "on_change"
    dump_tables: bool = False


class Seeds(_Section):
    placement: pydantic.NonNegativeInt = 1
    rng: pydantic.NonNegativeInt = 1


class Sweep(_Section):
    knob: str = "protocol.coverage_ratio"
    values: list[float] = pydantic.Field(default_factory=lambda: [1.0, 1.5, 2.0], min_length=1)
    seeds: list[pydantic.NonNegativeInt] = pydantic.Field(default_factory=lambda: [1, 2, 3, 4, 5], min_length=1)


ScenarioConfig.model_rebuild()
