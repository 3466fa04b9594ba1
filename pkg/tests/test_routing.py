import math
import unittest

import numpy as np

from wsn_routing.rng import ScenarioRng
from wsn_routing.routing import (
    ForwardingEntry,
    ForwardingTable,
    RoutingError,
    TopologyGraph,
    UnreachableDestination,
    ZeroCostLink,
    assign_probabilities,
    average_cost,
    brute_force_suffix_costs,
    build_topology,
    discover_routes,
    dump_tables,
    geometric_forward_filter,
    next_hop,
    prune_table,
    unreachable_nodes,
)
from wsn_routing.routing_metric import LinkCost
from tests._utils.testing_configs import TEST_RADIO


def synthetic_link(sender: int, receiver: int, value: float) -> LinkCost:
    return LinkCost(
        sender=sender, receiver=receiver, delivery_energy=value, tx=1.0, rx=0.0, coverage_area=1.0, value=value
    )


def triangle() -> TopologyGraph:
    """Destination 0, relay 1 halfway, source 2; 2-1 and 1-0 cost 1, 2-0 costs 3."""
    graph = TopologyGraph({0: (0.0, 0.0), 1: (50.0, 0.0), 2: (100.0, 0.0)})
    for sender, receiver, value in [(2, 1, 1.0), (1, 0, 1.0), (2, 0, 3.0), (1, 2, 1.0)]:
        graph.add_link(synthetic_link(sender, receiver, value))
    return graph


class FixedDraws:

    def __init__(self, draws: list[float]):
        self._draws = list(draws)

    def random(self) -> float:
        return self._draws.pop(0)


class Test_Geometric_Forward_Filter(unittest.TestCase):

    def setUp(self):
        self.positions = {"D": (0.0, 0.0), "I": (50.0, 0.0), "J": (80.0, 0.0), "S": (100.0, 0.0), "K": (20.0, 0.0)}

    def test_candidate_between_holder_and_source(self):
        self.assertTrue(geometric_forward_filter("J", "I", "S", "D", self.positions))

    def test_candidate_behind_holder(self):
        self.assertFalse(geometric_forward_filter("K", "I", "S", "D", self.positions))

    def test_holder_itself(self):
        self.assertTrue(geometric_forward_filter("I", "I", "S", "D", self.positions))


class Test_Discover_Routes(unittest.TestCase):

    def test_two_nodes(self):
        graph = TopologyGraph({0: (0.0, 0.0), 1: (30.0, 0.0)})
        graph.add_link(synthetic_link(1, 0, 0.7))
        tables = discover_routes(graph, 0)
        self.assertEqual(tables[1].entries, (ForwardingEntry(neighbor=0, cost_to_destination=0.7, probability=1.0),))
        self.assertEqual(tables[1].average_cost, 0.7)
        self.assertEqual(tables[0].entries, ())
        self.assertEqual(tables[0].average_cost, 0.0)

    def test_triangle_prefers_relay(self):
        tables = discover_routes(triangle(), 0)
        source = tables[2]
        self.assertEqual(source.best_entry().neighbor, 1)
        self.assertEqual(source.best_entry().cost_to_destination, 2.0)
        self.assertEqual(source.neighbors, (0, 1))
        self.assertAlmostEqual(source.average_cost, 2.4, delta=1e-12)

    def test_hops_away_from_destination_are_not_used(self):
        tables = discover_routes(triangle(), 0)
        self.assertEqual(tables[1].neighbors, (0,))

    def test_alpha_one_keeps_only_the_cheapest(self):
        tables = discover_routes(triangle(), 0, alpha=1.0)
        self.assertEqual(tables[2].neighbors, (1,))

    def test_isolated_node_is_unreachable(self):
        graph = TopologyGraph({0: (0.0, 0.0), 1: (30.0, 0.0), 2: (90.0, 90.0)})
        graph.add_link(synthetic_link(1, 0, 0.5))
        tables = discover_routes(graph, 0)
        self.assertEqual(tables[2].entries, ())
        self.assertEqual(tables[2].average_cost, math.inf)
        self.assertEqual(unreachable_nodes(tables), frozenset({2}))
        with self.assertRaises(UnreachableDestination):
            tables[2].best_entry()

    def test_equidistant_neighbors_do_not_loop(self):
        graph = TopologyGraph({0: (0.0, 0.0), 1: (30.0, 40.0), 2: (40.0, 30.0)})
        for sender, receiver in [(1, 2), (2, 1), (1, 0), (2, 0)]:
            graph.add_link(synthetic_link(sender, receiver, 1.0))
        tables = discover_routes(graph, 0)
        self.assertIn(1, tables[2].neighbors)
        self.assertNotIn(2, tables[1].neighbors)

    def test_unknown_destination(self):
        with self.assertRaises(RoutingError):
            discover_routes(triangle(), 9)

    def test_matches_exhaustive_enumeration_on_random_graphs(self):
        """Table costs equal the cheapest admissible path found by enumerating every simple path."""
        generator = np.random.default_rng(2024)
        for _ in range(200):
            coords = generator.uniform(0.0, 100.0, (10, 2))
            positions = {node_id: (float(x), float(y)) for node_id, (x, y) in enumerate(coords)}
            areas = {node_id: float(area) for node_id, area in enumerate(generator.uniform(50.0, 500.0, 10))}
            graph = build_topology(positions, 45.0, TEST_RADIO, areas, sinks=[0])
            tables = discover_routes(graph, 0)
            expected = brute_force_suffix_costs(graph, 0)
            for node_id in range(1, 10):
                table = tables[node_id]
                if expected[node_id] is None:
                    self.assertEqual(table.entries, ())
                else:
                    self.assertEqual(table.best_entry().cost_to_destination, expected[node_id])

    def test_probabilities_sum_to_one(self):
        for seed in range(100):
            coords = ScenarioRng(seed).uniform(0.0, 100.0, 30).reshape(15, 2)
            positions = {node_id: (float(x), float(y)) for node_id, (x, y) in enumerate(coords)}
            graph = build_topology(positions, 40.0, TEST_RADIO, {node_id: 100.0 for node_id in positions}, sinks=[0])
            for table in discover_routes(graph, 0).values():
                if table.entries:
                    self.assertAlmostEqual(sum(entry.probability for entry in table.entries), 1.0, delta=1e-9)


class Test_Build_Topology(unittest.TestCase):

    def setUp(self):
        self.positions = {0: (0.0, 0.0), 1: (30.0, 0.0), 2: (70.0, 0.0)}
        self.areas = {0: 10.0, 1: 10.0, 2: 10.0}

    def test_links_within_range_only(self):
        graph = build_topology(self.positions, 40.0, TEST_RADIO, self.areas)
        self.assertEqual(sorted(graph.graph.edges), [(0, 1), (1, 0), (1, 2), (2, 1)])

    def test_sinks_never_send(self):
        graph = build_topology(self.positions, 40.0, TEST_RADIO, self.areas, sinks=[0])
        self.assertNotIn((0, 1), graph.graph.edges)
        self.assertIn((1, 0), graph.graph.edges)

    def test_restricted_to_alive_nodes(self):
        graph = build_topology(self.positions, 80.0, TEST_RADIO, self.areas).restricted_to([0, 2])
        self.assertEqual(graph.vertices, [0, 2])
        self.assertEqual(sorted(graph.graph.edges), [(0, 2), (2, 0)])
        self.assertEqual(graph.link(2, 0).sender, 2)

    def test_self_edge_is_rejected(self):
        with self.assertRaises(RoutingError):
            TopologyGraph(self.positions).add_link(synthetic_link(1, 1, 1.0))


class Test_Table_Construction(unittest.TestCase):

    def test_prune(self):
        candidates = [(7, 9.0), (3, 2.0), (5, 4.0)]
        self.assertEqual(prune_table(candidates, 2.0), [(3, 2.0), (5, 4.0)])
        self.assertEqual(prune_table(candidates, 1.0), [(3, 2.0)])
        self.assertEqual(prune_table([(4, 100.0)], 1.0), [(4, 100.0)])

    def test_prune_rejects_alpha_below_one(self):
        with self.assertRaises(RoutingError):
            prune_table([(1, 1.0)], 0.5)

    def test_probabilities_inverse_to_cost(self):
        entries = assign_probabilities([(1, 2.0), (2, 4.0)])
        self.assertAlmostEqual(entries[0].probability, 2 / 3, delta=1e-12)
        self.assertAlmostEqual(entries[1].probability, 1 / 3, delta=1e-12)

    def test_single_and_equal_costs(self):
        self.assertEqual(assign_probabilities([(5, 0.3)])[0].probability, 1.0)
        for entry in assign_probabilities([(1, 0.5), (2, 0.5), (3, 0.5)]):
            self.assertAlmostEqual(entry.probability, 1 / 3, delta=1e-12)

    def test_zero_cost(self):
        with self.assertRaises(ZeroCostLink) as context:
            assign_probabilities([(1, 0.0), (2, 1.0)])
        self.assertIn("zero-cost link", str(context.exception))

    def test_average_cost(self):
        self.assertAlmostEqual(average_cost(assign_probabilities([(1, 2.0), (2, 4.0)])), 8 / 3, delta=1e-12)
        self.assertAlmostEqual(average_cost(assign_probabilities([(1, 0.7), (2, 0.7)])), 0.7, delta=1e-12)
        self.assertEqual(average_cost(assign_probabilities([(1, 1.5)])), 1.5)


class Test_Next_Hop(unittest.TestCase):

    def setUp(self):
        entries = tuple(assign_probabilities([(4, 2.0), (9, 4.0)]))
        self.table = ForwardingTable(owner=1, destination=0, entries=entries, average_cost=average_cost(entries))

    def test_inverse_cdf(self):
        self.assertEqual(next_hop(self.table, FixedDraws([0.5])), 4)
        self.assertEqual(next_hop(self.table, FixedDraws([0.7])), 9)

    def test_single_entry_consumes_one_draw(self):
        draws = FixedDraws([0.99, 0.1])
        table = ForwardingTable(1, 0, (ForwardingEntry(3, 1.0, 1.0),), 1.0)
        self.assertEqual(next_hop(table, draws), 3)
        self.assertEqual(draws.random(), 0.1)

    def test_empirical_frequency(self):
        rng = ScenarioRng(5)
        picks = [next_hop(self.table, rng) for _ in range(30000)]
        self.assertAlmostEqual(picks.count(4) / len(picks), 2 / 3, delta=0.01)

    def test_empty_table(self):
        with self.assertRaises(UnreachableDestination):
            next_hop(ForwardingTable(1, 0, (), math.inf), FixedDraws([0.5]))


class Test_Dump_Tables(unittest.TestCase):

    def test_format(self):
        self.assertEqual(dump_tables(discover_routes(triangle(), 0)), "1 0 1 1\n2 0 3 0.4\n2 1 2 0.6\n")

    def test_no_entries(self):
        self.assertEqual(dump_tables({}), "")


if __name__ == "__main__":
    unittest.main() # pragma: no cover
