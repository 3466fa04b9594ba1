"""Geometry of the sensor field.

Coverage is evaluated on a uniform grid of sample points (cell centers, row-major: y outer, x inner).
A point is covered by a sensor when it lies within the sensor's sensing disk, boundary included.
"""
from __future__ import annotations
from typing import Iterable, Mapping, Optional, Sequence
import dataclasses
import math

import numpy as np

from wsn_routing.script_args.configs import FieldConfig


Point = tuple[float, float]
_CAPACITY_EPSILON = 1e-9


class FieldModelError(Exception):
    pass


class DegenerateField(FieldModelError):
    pass


@dataclasses.dataclass(frozen=True)
class SensorPlacement:
    node_id: int
    position: Point
    sensing_range: float
    radio_range: float

    def __post_init__(self) -> None:
        if self.sensing_range <= 0 or self.radio_range <= 0:
            raise FieldModelError(f"Sensor {self.node_id} needs positive sensing and radio ranges.")


@dataclasses.dataclass(frozen=True, eq=False)
class SubRegion:
    region_id: int
    covering_set: frozenset[int]
    sample_points: np.ndarray
    area_estimate: float
    point_indices: np.ndarray

    @property
    def covered(self) -> bool:
        return bool(self.covering_set)

    @property
    def centroid(self) -> Point:
        x, y = self.sample_points.mean(axis=0)
        return (float(x), float(y))


@dataclasses.dataclass(frozen=True)
class Cover:
    members: frozenset[int]
    index: int


@dataclasses.dataclass(frozen=True, eq=False)
class FieldGrid:
    nx: int
    ny: int
    cell_width: float
    cell_height: float
    points: np.ndarray

    @property
    def cell_area(self) -> float:
        return self.cell_width * self.cell_height

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_diagonal(self) -> float:
        return math.hypot(self.cell_width, self.cell_height)

    def error_bound(self, perimeter: float, area: float) -> float:
        """Upper bound of the grid error of a coverage fraction for a shape of the given perimeter."""
        return self.cell_diagonal * perimeter / area

    def index_of(self, position: Point) -> int:
        """Index of the sample point whose cell contains `position`."""
        ix = min(self.nx - 1, max(0, int(position[0] // self.cell_width)))
        iy = min(self.ny - 1, max(0, int(position[1] // self.cell_height)))
        return iy * self.nx + ix


def build_grid(field: FieldConfig) -> FieldGrid:
    nx = int(round(field.width / field.resolution))
    ny = int(round(field.height / field.resolution))
    if nx <= 0 or ny <= 0:
        raise DegenerateField("degenerate field")
    cell_width, cell_height = field.width / nx, field.height / ny
    xs = (np.arange(nx) + 0.5) * cell_width
    ys = (np.arange(ny) + 0.5) * cell_height
    points = np.column_stack([np.tile(xs, ny), np.repeat(ys, nx)])
    return FieldGrid(nx=nx, ny=ny, cell_width=cell_width, cell_height=cell_height, points=points)


def covers_point(placement: SensorPlacement, point: Point) -> bool:
    dx = placement.position[0] - point[0]
    dy = placement.position[1] - point[1]
    return dx * dx + dy * dy <= placement.sensing_range * placement.sensing_range


class CoverageOracle:
    """Grid coverage of a fixed deployment.

    Row i of the coverage matrix tells which sample points the i-th placement covers. The simulator keeps
    one oracle per scenario and queries it with subsets of node ids.
    """

    def __init__(self, placements: Sequence[SensorPlacement], field: FieldConfig):
        self.field = field
        self.grid = build_grid(field)
        self.node_ids: tuple[int, ...] = tuple(p.node_id for p in placements)
        self._row_of = {node_id: row for row, node_id in enumerate(self.node_ids)}
        self.matrix = _coverage_matrix(placements, self.grid)

    def rows(self, members: Iterable[int]) -> list[int]:
        return sorted(self._row_of[node_id] for node_id in members)

    def covered_points(self, members: Iterable[int]) -> np.ndarray:
        rows = self.rows(members)
        if not rows:
            return np.zeros(self.grid.size, dtype=bool)
        return self.matrix[rows].any(axis=0)

    def ratio(self, members: Iterable[int]) -> float:
        return float(self.covered_points(members).sum()) / self.grid.size

    def is_cover(self, members: Iterable[int]) -> bool:
        return bool(self.covered_points(members).all())

    def coverage_areas(self) -> dict[int, float]:
        """Area of each sensor's disk inside the field, floored at one cell so it is never zero."""
        counts = self.matrix.sum(axis=1)
        return {
            node_id: max(1, int(counts[row])) * self.grid.cell_area
            for row, node_id in enumerate(self.node_ids)
        }

    def subregions(self) -> list[SubRegion]:
        grid = self.grid
        if not self.node_ids:
            everything = np.arange(grid.size)
            return [SubRegion(0, frozenset(), grid.points, grid.size * grid.cell_area, everything)]

        packed = np.packbits(self.matrix, axis=0).T
        labels, inverse = np.unique(packed, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.cumsum(np.bincount(inverse, minlength=len(labels)))[:-1]
        groups = np.split(order, bounds)

        labeled = []
        for indices in groups:
            members = np.flatnonzero(self.matrix[:, indices[0]])
            covering = frozenset(self.node_ids[row] for row in members)
            labeled.append((tuple(sorted(covering)), covering, indices))
        labeled.sort(key=lambda item: item[0])
        return [
            SubRegion(
                region_id=region_id,
                covering_set=covering,
                sample_points=grid.points[indices],
                area_estimate=len(indices) * grid.cell_area,
                point_indices=indices,
            )
            for region_id, (_, covering, indices) in enumerate(labeled)
        ]

    def greedy_cover_sequence(
        self,
        residual_energies: Mapping[int, float],
        per_round_cost: float,
        max_covers: Optional[int] = None,
    ) -> list[Cover]:
        if per_round_cost <= 0:
            raise FieldModelError("per_round_cost must be positive to bound the cover sequence.")
        if any(energy < 0 for energy in residual_energies.values()):
            raise FieldModelError("Residual energies must be non-negative.")

        ids = self.node_ids
        energy = np.array([residual_energies.get(node_id, 0.0) for node_id in ids], dtype=float)
        capacity = np.floor(energy / per_round_cost + _CAPACITY_EPSILON).astype(int)
        covers: list[Cover] = []
        while max_covers is None or len(covers) < max_covers:
            members = self._greedy_cover(energy, capacity)
            if members is None:
                break
            for row in members:
                capacity[row] -= 1
                energy[row] -= per_round_cost
            covers.append(Cover(members=frozenset(ids[row] for row in members), index=len(covers)))
        return covers

    def _greedy_cover(self, energy: np.ndarray, capacity: np.ndarray) -> Optional[list[int]]:
        candidate = capacity > 0
        covered = np.zeros(self.grid.size, dtype=bool)
        members: list[int] = []
        while not covered.all():
            point = int(np.argmin(covered))
            rows = np.flatnonzero(self.matrix[:, point] & candidate)
            if rows.size == 0:
                return None
            best = min(rows, key=lambda row: (-energy[row], self.node_ids[row]))
            members.append(int(best))
            candidate[best] = False
            covered |= self.matrix[best]
        return members


def _coverage_matrix(placements: Sequence[SensorPlacement], grid: FieldGrid) -> np.ndarray:
    matrix = np.zeros((len(placements), grid.size), dtype=bool)
    xs, ys = grid.points[:, 0], grid.points[:, 1]
    for row, placement in enumerate(placements):
        dx = xs - placement.position[0]
        dy = ys - placement.position[1]
        matrix[row] = dx * dx + dy * dy <= placement.sensing_range * placement.sensing_range
    return matrix


def coverage_ratio(placements: Sequence[SensorPlacement], field: FieldConfig) -> float:
    oracle = CoverageOracle(placements, field)
    return oracle.ratio(oracle.node_ids)


def is_cover(members: Iterable[int], placements: Sequence[SensorPlacement], field: FieldConfig) -> bool:
    return CoverageOracle(placements, field).is_cover(members)


def compute_subregions(placements: Sequence[SensorPlacement], field: FieldConfig) -> list[SubRegion]:
    """Partition the grid into regions covered by exactly the same set of sensors.

    The uncovered region, if any, is returned too, with an empty covering set.
    """
    return CoverageOracle(placements, field).subregions()


def greedy_cover_sequence(
    placements: Sequence[SensorPlacement],
    residual_energies: Mapping[int, float],
    per_round_cost: float,
    field: FieldConfig,
    max_covers: Optional[int] = None,
) -> list[Cover]:
    """Build covers one after another, each drawing per_round_cost from every member.

    Each cover is grown by taking uncovered sample points in row-major order and adding, for each, the
    covering sensor with the most remaining energy (lowest id on ties) among those that can still afford
    another round. The sequence ends at the first cover that cannot be completed.
    """
    return CoverageOracle(placements, field).greedy_cover_sequence(residual_energies, per_round_cost, max_covers)


def validate_cover_sequence(
    covers: Sequence[Cover],
    placements: Sequence[SensorPlacement],
    field: FieldConfig,
    residual_energies: Mapping[int, float],
    per_round_cost: float,
) -> list[str]:
    """Return a description of every cover that misses part of the field and every overdrawn sensor."""
    oracle = CoverageOracle(placements, field)
    problems = [f"cover {cover.index} does not cover the field" for cover in covers if not oracle.is_cover(cover.members)]
    charged: dict[int, float] = {}
    for cover in covers:
        for node_id in cover.members:
            charged[node_id] = charged.get(node_id, 0.0) + per_round_cost
    for node_id, total in sorted(charged.items()):
        budget = residual_energies.get(node_id, 0.0)
        if total > budget * (1 + _CAPACITY_EPSILON):
            problems.append(f"sensor {node_id} is charged {total} J beyond its {budget} J")
    return problems
