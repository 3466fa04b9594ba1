"""Whole-lifetime checks on the desk profile: 100 nodes with 0.5 J on a 200 x 200 m field.

These run complete scenarios and take minutes rather than seconds.
"""
import collections
import os
import unittest
from typing import Optional

from wsn_routing.metrics_report import sweep
from wsn_routing.script_args import parse_config
from wsn_routing.script_args.configs import ScenarioConfig
from wsn_routing.simulation import check_constraints, deploy, run_round, simulate


CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "config")
DESK_SEEDS = tuple(range(1, 11))
JOBS = 4


def desk_config(*overrides: str) -> ScenarioConfig:
    return parse_config(os.path.join(CONFIG_DIR, "desk.json"), overrides)


class Test_Head_Rotation(unittest.TestCase):

    def test_heads_rotate_inside_every_cluster(self):
        state = deploy(desk_config())
        served: dict[int, collections.Counter] = collections.defaultdict(collections.Counter)
        for _ in range(50):
            state, _ = run_round(state)
            for assignment in state.assignments:
                if assignment.head is not None:
                    served[assignment.cluster_id][assignment.head] += 1
        self.assertEqual(len(served), len(state.clusters))
        for cluster_id, counts in served.items():
            if len(state.clusters[cluster_id]) < 4:
                continue
            self.assertGreaterEqual(len(counts), 4, f"cluster {cluster_id}: {counts}")
            self.assertLessEqual(max(counts.values()), 25, f"cluster {cluster_id}: {counts}")


class Test_Lifetime(unittest.TestCase):

    def first_deaths(self, protocol: str) -> list[Optional[int]]:
        base = desk_config(f"protocol.name={protocol}", "protocol.rounds_max=300")
        result = sweep(base, [2.0], DESK_SEEDS, knob="coverage_ratio", jobs=JOBS)
        return [summary.first_death_round for summary in result.points[0].summaries]

    def test_proposed_loses_its_first_node_no_earlier_than_leach(self):
        proposed, leach = self.first_deaths("proposed"), self.first_deaths("leach")
        # None means nobody died within the run
        outlived = [
            proposed_death is None or (leach_death is not None and proposed_death >= leach_death)
            for proposed_death, leach_death in zip(proposed, leach)
        ]
        self.assertGreaterEqual(sum(outlived), 8, f"proposed {proposed}, leach {leach}")


class Test_Delivery(unittest.TestCase):

    def test_delivery_before_the_first_death(self):
        base = desk_config("protocol.rounds_max=300")
        result = sweep(base, [1.5, 2.0, 2.5], DESK_SEEDS[:5], knob="coverage_ratio", jobs=JOBS)
        for point in result.points:
            for summary in point.summaries:
                self.assertGreaterEqual(
                    summary.pdf_before_first_death, 0.95, f"ratio {point.knob_value}, seed {summary.seed}"
                )


class Test_Coverage_Ratio_Trend(unittest.TestCase):

    def test_alive_at_checkpoint_does_not_grow_with_the_coverage_ratio(self):
        for protocol in ("proposed", "leach"):
            base = desk_config(f"protocol.name={protocol}")
            base = base.with_value("protocol.rounds_max", base.checkpoint_round + 1)
            result = sweep(base, [1.0, 1.5, 2.0], DESK_SEEDS, knob="coverage_ratio", jobs=JOBS)
            means = [point.mean("alive_at_checkpoint") for point in result.points]
            for lower, higher in zip(means, means[1:]):
                self.assertGreaterEqual(lower, higher, f"{protocol}: {means}")


class Test_Constraints(unittest.TestCase):

    def test_desk_runs_are_clean_when_radio_reaches_twice_the_sensing_range(self):
        for protocol in ("proposed", "leach"):
            for seed in DESK_SEEDS[:3]:
                config = desk_config(
                    f"protocol.name={protocol}",
                    "protocol.rounds_max=200",
                    f"seeds.placement={seed}",
                    f"seeds.rng={seed}",
                )
                self.assertGreaterEqual(config.radio_range, 2 * config.nodes.sensing_range)
                state, _ = simulate(config)
                self.assertEqual(check_constraints(state), [], f"{protocol}, seed {seed}")


if __name__ == "__main__":
    unittest.main() # pragma: no cover
