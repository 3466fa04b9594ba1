import math
import unittest

from wsn_routing.field_model import (
    Cover,
    CoverageOracle,
    DegenerateField,
    FieldModelError,
    SensorPlacement,
    build_grid,
    compute_subregions,
    coverage_ratio,
    covers_point,
    greedy_cover_sequence,
    is_cover,
    validate_cover_sequence,
)
from wsn_routing.rng import ScenarioRng
from wsn_routing.script_args.configs import FieldConfig
from tests._utils.testing_configs import TEST_FIELD


FIELD = FieldConfig(width=100.0, height=100.0, grid_resolution=2.0)


def sensor(node_id: int, x: float, y: float, sensing_range: float) -> SensorPlacement:
    return SensorPlacement(node_id=node_id, position=(x, y), sensing_range=sensing_range, radio_range=sensing_range)


class Test_Covers_Point(unittest.TestCase):

    def test_center_and_boundary(self):
        placement = sensor(0, 0.0, 0.0, 10.0)
        self.assertTrue(covers_point(placement, (0.0, 0.0)))
        self.assertTrue(covers_point(placement, (10.0, 0.0)))

    def test_just_outside_diagonal(self):
        self.assertFalse(covers_point(sensor(0, 0.0, 0.0, 10.0), (7.1, 7.1)))

    def test_non_positive_range_is_rejected(self):
        with self.assertRaises(FieldModelError):
            sensor(0, 0.0, 0.0, 0.0)


class Test_Field_Grid(unittest.TestCase):

    def test_default_resolution_gives_two_hundred_columns(self):
        grid = build_grid(TEST_FIELD)
        self.assertEqual(grid.nx, 200)
        self.assertEqual(grid.ny, 200)
        self.assertAlmostEqual(grid.cell_area, 0.25)

    def test_points_are_cell_centers_in_row_major_order(self):
        grid = build_grid(FIELD)
        self.assertEqual(grid.size, 2500)
        self.assertEqual(tuple(grid.points[0]), (1.0, 1.0))
        self.assertEqual(tuple(grid.points[1]), (3.0, 1.0))
        self.assertEqual(tuple(grid.points[50]), (1.0, 3.0))

    def test_index_of_position(self):
        grid = build_grid(FIELD)
        self.assertEqual(grid.index_of((0.0, 0.0)), 0)
        self.assertEqual(grid.index_of((3.5, 2.5)), 51)
        self.assertEqual(grid.index_of((100.0, 100.0)), grid.size - 1)

    def test_degenerate_field(self):
        field = FieldConfig.model_construct(width=0.5, height=0.5, grid_resolution=2.0)
        with self.assertRaises(DegenerateField):
            build_grid(field)


class Test_Coverage_Ratio(unittest.TestCase):

    def test_no_sensors(self):
        self.assertEqual(coverage_ratio([], FIELD), 0.0)

    def test_single_sensor_covering_everything(self):
        self.assertEqual(coverage_ratio([sensor(0, 50.0, 50.0, 80.0)], FIELD), 1.0)

    def test_disk_area_within_grid_error(self):
        grid = build_grid(FIELD)
        radius = 25.0
        exact = math.pi * radius**2 / 1e4
        bound = grid.error_bound(2 * math.pi * radius, 1e4)
        self.assertLess(abs(coverage_ratio([sensor(0, 50.0, 50.0, radius)], FIELD) - exact), bound)

    def test_halving_resolution_stays_within_previous_bound(self):
        fine = FieldConfig(width=100.0, height=100.0, grid_resolution=1.0)
        scene = [sensor(0, 30.0, 40.0, 20.0), sensor(1, 65.0, 55.0, 25.0)]
        perimeter = 2 * math.pi * (20.0 + 25.0)
        bound = build_grid(FIELD).error_bound(perimeter, 1e4)
        self.assertLess(abs(coverage_ratio(scene, FIELD) - coverage_ratio(scene, fine)), bound)

    def test_adding_a_sensor_never_lowers_coverage(self):
        scene = [sensor(0, 20.0, 20.0, 15.0)]
        before = coverage_ratio(scene, FIELD)
        after = coverage_ratio(scene + [sensor(1, 70.0, 60.0, 15.0)], FIELD)
        self.assertGreaterEqual(after, before)


class Test_Is_Cover(unittest.TestCase):

    def setUp(self):
        self.placements = [sensor(0, 25.0, 50.0, 60.0), sensor(1, 75.0, 50.0, 60.0), sensor(2, 50.0, 50.0, 10.0)]

    def test_two_wide_sensors_cover_the_field(self):
        self.assertTrue(is_cover({0, 1}, self.placements, FIELD))

    def test_superset_of_a_cover(self):
        self.assertTrue(is_cover({0, 1, 2}, self.placements, FIELD))

    def test_empty_set(self):
        self.assertFalse(is_cover(set(), self.placements, FIELD))

    def test_single_sensor_leaves_holes(self):
        self.assertFalse(is_cover({0}, self.placements, FIELD))
        self.assertFalse(is_cover({2}, self.placements, FIELD))


class Test_Subregions(unittest.TestCase):

    def test_two_overlapping_disks(self):
        regions = compute_subregions([sensor(0, 30.0, 50.0, 25.0), sensor(1, 70.0, 50.0, 25.0)], FIELD)
        self.assertEqual(
            [region.covering_set for region in regions],
            [frozenset(), frozenset({0}), frozenset({0, 1}), frozenset({1})],
        )
        self.assertEqual([region.region_id for region in regions], [0, 1, 2, 3])
        self.assertFalse(regions[0].covered)

    def test_disjoint_disks(self):
        regions = compute_subregions([sensor(0, 20.0, 20.0, 10.0), sensor(1, 80.0, 80.0, 10.0)], FIELD)
        self.assertEqual(len(regions), 3)
        self.assertEqual(sum(1 for region in regions if region.covered), 2)

    def test_zero_sensors(self):
        regions = compute_subregions([], FIELD)
        self.assertEqual(len(regions), 1)
        self.assertEqual(regions[0].covering_set, frozenset())
        self.assertAlmostEqual(regions[0].area_estimate, 1e4)

    def test_regions_partition_the_grid(self):
        placements = [sensor(0, 30.0, 30.0, 30.0), sensor(1, 60.0, 40.0, 25.0), sensor(2, 45.0, 70.0, 35.0)]
        oracle = CoverageOracle(placements, FIELD)
        regions = oracle.subregions()
        indices = sorted(int(index) for region in regions for index in region.point_indices)
        self.assertEqual(indices, list(range(oracle.grid.size)))
        self.assertAlmostEqual(sum(region.area_estimate for region in regions), 1e4)

    def test_random_deployments_are_partitioned(self):
        for seed in range(100):
            rng = ScenarioRng(seed)
            count = 1 + seed % 12
            xs, ys = rng.uniform(0.0, 100.0, count), rng.uniform(0.0, 100.0, count)
            radii = rng.uniform(5.0, 40.0, count)
            placements = [
                sensor(node_id, float(x), float(y), float(radius))
                for node_id, (x, y, radius) in enumerate(zip(xs, ys, radii))
            ]
            regions = compute_subregions(placements, FIELD)
            indices = sorted(int(index) for region in regions for index in region.point_indices)
            self.assertEqual(indices, list(range(2500)), f"seed {seed}")
            self.assertEqual(len({region.covering_set for region in regions}), len(regions), f"seed {seed}")
            for region in regions:
                for point in (region.sample_points[0], region.sample_points[-1]):
                    covering = {p.node_id for p in placements if covers_point(p, (point[0], point[1]))}
                    self.assertEqual(covering, set(region.covering_set), f"seed {seed}")

    def test_points_of_a_region_share_its_covering_set(self):
        placements = [sensor(0, 30.0, 50.0, 25.0), sensor(1, 70.0, 50.0, 25.0)]
        for region in compute_subregions(placements, FIELD):
            for point in region.sample_points[:20]:
                covering = {p.node_id for p in placements if covers_point(p, (point[0], point[1]))}
                self.assertEqual(covering, set(region.covering_set))


class Test_Greedy_Cover_Sequence(unittest.TestCase):

    def test_single_node_with_three_rounds_of_energy(self):
        covers = greedy_cover_sequence([sensor(0, 50.0, 50.0, 80.0)], {0: 3e-3}, 1e-3, FIELD)
        self.assertEqual(len(covers), 3)
        self.assertTrue(all(cover.members == frozenset({0}) for cover in covers))
        self.assertEqual([cover.index for cover in covers], [0, 1, 2])

    def test_two_full_coverage_singletons(self):
        placements = [sensor(0, 50.0, 50.0, 80.0), sensor(1, 50.0, 50.0, 80.0)]
        covers = greedy_cover_sequence(placements, {0: 1e-3, 1: 1e-3}, 1e-3, FIELD)
        self.assertEqual([cover.members for cover in covers], [frozenset({0}), frozenset({1})])

    def test_richer_sensor_is_used_first(self):
        placements = [sensor(0, 50.0, 50.0, 80.0), sensor(1, 50.0, 50.0, 80.0)]
        covers = greedy_cover_sequence(placements, {0: 1e-3, 1: 2e-3}, 1e-3, FIELD)
        self.assertEqual(covers[0].members, frozenset({1}))
        self.assertEqual(len(covers), 3)

    def test_no_cover_exists(self):
        self.assertEqual(greedy_cover_sequence([sensor(0, 50.0, 50.0, 10.0)], {0: 1.0}, 1e-3, FIELD), [])

    def test_max_covers_caps_the_sequence(self):
        covers = greedy_cover_sequence([sensor(0, 50.0, 50.0, 80.0)], {0: 1.0}, 1e-3, FIELD, max_covers=4)
        self.assertEqual(len(covers), 4)

    def test_sequence_passes_validation(self):
        placements = [sensor(0, 25.0, 50.0, 60.0), sensor(1, 75.0, 50.0, 60.0), sensor(2, 50.0, 50.0, 80.0)]
        energies = {0: 4e-3, 1: 3e-3, 2: 2e-3}
        covers = greedy_cover_sequence(placements, energies, 1e-3, FIELD)
        self.assertGreater(len(covers), 0)
        self.assertEqual(validate_cover_sequence(covers, placements, FIELD, energies, 1e-3), [])

    def test_negative_energy_is_rejected(self):
        with self.assertRaises(FieldModelError):
            greedy_cover_sequence([sensor(0, 50.0, 50.0, 80.0)], {0: -1.0}, 1e-3, FIELD)


class Test_Validate_Cover_Sequence(unittest.TestCase):

    def test_reports_incomplete_cover_and_overdraft(self):
        placements = [sensor(0, 50.0, 50.0, 80.0), sensor(1, 50.0, 50.0, 10.0)]
        covers = greedy_cover_sequence(placements, {0: 2e-3, 1: 2e-3}, 1e-3, FIELD)
        bogus = covers + [Cover(members=frozenset({1}), index=len(covers))]
        problems = validate_cover_sequence(bogus, placements, FIELD, {0: 2e-3, 1: 0.0}, 1e-3)
        self.assertIn(f"cover {len(covers)} does not cover the field", problems)
        self.assertTrue(any(problem.startswith("sensor 1 is charged") for problem in problems))


if __name__ == "__main__":
    unittest.main() # pragma: no cover
