import json
import os
import tempfile
import unittest

from ..errors import ScenarioError
from ..scenario import (
    FDParams, Link, RoadConnection, build_lane_groups, discretize, load_scenario,
    parse_scenario, save_scenario, serialize_scenario,
)
from .base import (
    MERGE_DIVERGE, MINIMAL, fork_scenario, link_doc, network_scenario, scenario_doc,
    single_link_scenario,
)


FD = FDParams(capacity=0.5, free_flow_speed=25.0, congestion_wave_speed=6.25,
              jam_density=0.125)


def _link(lanes, length=500.0):
    return Link(id=7, start_node=0, end_node=1, length=length, lanes=lanes, fd=FD)


def _connection(cid, first, last):
    return RoadConnection(id=cid, in_link=7, out_link=cid, in_lanes=(first, last),
                          out_lanes=(1, 1))


class TestParseScenario(unittest.TestCase):

    def test_minimal_file(self):
        scenario = load_scenario(MINIMAL)

        self.assertEqual(len(scenario.links), 1)
        self.assertEqual(len(scenario.roadconnections), 0)
        self.assertTrue(scenario.links[1].is_sink)
        self.assertFalse(scenario.links[1].is_source)
        self.assertEqual(scenario.nodes[0].outgoing, (1,))
        self.assertEqual(scenario.nodes[1].incoming, (1,))

    def test_merge_has_two_connections_at_the_merge_node(self):
        scenario = network_scenario([(1, 0, 2), (2, 1, 2), (3, 2, 3)])

        self.assertEqual(len(scenario.roadconnections), 2)
        self.assertEqual(len(scenario.incoming_connections(3)), 2)
        self.assertEqual(scenario.nodes[2].incoming, (1, 2))
        self.assertTrue(scenario.links[1].is_source)
        self.assertFalse(scenario.links[3].is_source)

    def test_split_row_not_summing_to_one(self):
        with self.assertRaises(ScenarioError) as ctx:
            fork_scenario(splits=((2, 0.6), (3, 0.3)))

        self.assertIn('distribution sums to 0.9', ctx.exception.message)

    def test_split_rows_start_at_time_zero(self):
        doc = json.loads(serialize_scenario(fork_scenario()))
        doc['splits'][0]['rows'][0]['time'] = 10.0

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('first row must start at time 0', ctx.exception.message)

    def test_syntax_error_reports_line_and_column(self):
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario('{\n  "nodes": [,]\n}')

        self.assertIn('line 2', ctx.exception.message)
        self.assertIn('column', ctx.exception.message)

    def test_missing_top_level_key(self):
        doc = scenario_doc([0, 1], [link_doc(1, 0, 1)])
        del doc['vehicletypes']

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('vehicletypes', ctx.exception.message)

    def test_dangling_node_reference(self):
        doc = scenario_doc([0, 1], [link_doc(1, 0, 9)])

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('unknown node 9', ctx.exception.message)

    def test_duplicate_link_id(self):
        doc = scenario_doc([0, 1, 2], [link_doc(1, 0, 1), link_doc(1, 1, 2)])

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('duplicate link id 1', ctx.exception.message)

    def test_cfl_violation(self):
        with self.assertRaises(ScenarioError) as ctx:
            single_link_scenario(length=40.0)

        self.assertIn('CFL', ctx.exception.message)

    def test_triangle_must_fit_under_jam_density(self):
        fd = dict(capacity=0.5, free_flow_speed=25.0, congestion_wave_speed=6.25,
                  jam_density=0.05)

        with self.assertRaises(ScenarioError) as ctx:
            single_link_scenario(fd=fd)

        self.assertIn('jam density', ctx.exception.message)

    def test_connection_lane_range_outside_link(self):
        doc = scenario_doc(
            [0, 1, 2], [link_doc(1, 0, 1), link_doc(2, 1, 2)],
            connections=[{'id': 1, 'in_link': 1, 'out_link': 2,
                          'in_lanes': [1, 2], 'out_lanes': [1, 1]}])

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('lane range', ctx.exception.message)

    def test_connection_between_unjoined_links(self):
        doc = scenario_doc(
            [0, 1, 2, 3], [link_doc(1, 0, 1), link_doc(2, 2, 3)],
            connections=[{'id': 1, 'in_link': 1, 'out_link': 2,
                          'in_lanes': [1, 1], 'out_lanes': [1, 1]}])

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('is not the start node', ctx.exception.message)

    def test_duplicate_connection_pair(self):
        doc = scenario_doc(
            [0, 1, 2], [link_doc(1, 0, 1, lanes=2), link_doc(2, 1, 2)],
            connections=[
                {'id': 1, 'in_link': 1, 'out_link': 2, 'in_lanes': [1, 1], 'out_lanes': [1, 1]},
                {'id': 2, 'in_link': 1, 'out_link': 2, 'in_lanes': [2, 2], 'out_lanes': [1, 1]},
            ])

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('duplicates road connection 1', ctx.exception.message)

    def test_deterministic_path_must_be_connected(self):
        with self.assertRaises(ScenarioError) as ctx:
            fork_scenario(vehicletypes=[
                {'id': 0, 'routing': 'probabilistic'},
                {'id': 1, 'routing': 'deterministic', 'path': [2, 3]},
            ])

        self.assertIn('not connected', ctx.exception.message)

    def test_deterministic_path_must_end_on_a_sink(self):
        with self.assertRaises(ScenarioError) as ctx:
            doc = scenario_doc(
                [0, 1, 2], [link_doc(1, 0, 1), link_doc(2, 1, 2)],
                connections=[{'id': 1, 'in_link': 1, 'out_link': 2,
                              'in_lanes': [1, 1], 'out_lanes': [1, 1]}],
                vehicletypes=[{'id': 0, 'routing': 'deterministic', 'path': [1]}])
            parse_scenario(json.dumps(doc))

        self.assertIn('must end on a sink', ctx.exception.message)

    def test_unknown_routing(self):
        doc = scenario_doc([0, 1], [link_doc(1, 0, 1)],
                           vehicletypes=[{'id': 0, 'routing': 'sampled'}])

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('routing', ctx.exception.message)

    def test_demand_on_link_with_predecessors(self):
        doc = scenario_doc(
            [0, 1, 2], [link_doc(1, 0, 1), link_doc(2, 1, 2)],
            connections=[{'id': 1, 'in_link': 1, 'out_link': 2,
                          'in_lanes': [1, 1], 'out_lanes': [1, 1]}],
            demands=[{'link': 2, 'vehicle_type': 0, 'profile': [[0.0, 0.1]]}])

        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(doc))

        self.assertIn('not flagged as a source', ctx.exception.message)

    def test_flagged_source_with_predecessors_accepts_demand(self):
        doc = scenario_doc(
            [0, 1, 2], [link_doc(1, 0, 1), link_doc(2, 1, 2, is_source=True)],
            connections=[{'id': 1, 'in_link': 1, 'out_link': 2,
                          'in_lanes': [1, 1], 'out_lanes': [1, 1]}],
            demands=[{'link': 2, 'vehicle_type': 0, 'profile': [[0.0, 0.1]]}])

        scenario = parse_scenario(json.dumps(doc))

        self.assertTrue(scenario.links[2].is_source)

    def test_negative_demand(self):
        with self.assertRaises(ScenarioError) as ctx:
            single_link_scenario(demand=-0.1)

        self.assertIn('negative flow', ctx.exception.message)

    def test_steps_must_be_positive(self):
        doc = scenario_doc([0, 1], [link_doc(1, 0, 1)], steps=0)

        with self.assertRaises(ScenarioError):
            parse_scenario(json.dumps(doc))

    def test_missing_file(self):
        with self.assertRaises(ScenarioError) as ctx:
            load_scenario('/nonexistent/scenario.json')

        self.assertEqual(ctx.exception.exit_code, 2)


class TestScenarioModel(unittest.TestCase):

    def setUp(self):
        self.scenario = load_scenario(MERGE_DIVERGE)

    def test_flags(self):
        links = self.scenario.links
        self.assertTrue(links[1].is_source)
        self.assertTrue(links[2].is_source)
        self.assertFalse(links[3].is_source)
        self.assertTrue(links[5].is_sink)
        self.assertTrue(links[7].is_sink)
        self.assertFalse(links[4].is_sink)

    def test_successors(self):
        self.assertEqual(self.scenario.successors(3), (4, 5))
        self.assertEqual(self.scenario.successors(7), ())
        self.assertEqual([rc.id for rc in self.scenario.outgoing_connections(3)], [12, 13])

    def test_split_rows_follow_time(self):
        splits = self.scenario.splits

        self.assertEqual(splits.distribution(3, 3, 0, 0.0), ((4, 0.75), (5, 0.25)))
        self.assertEqual(splits.distribution(3, 3, 0, 199.0), ((4, 0.75), (5, 0.25)))
        self.assertEqual(splits.distribution(3, 3, 0, 200.0), ((4, 0.5), (5, 0.5)))
        self.assertIsNone(splits.distribution(4, 4, 0, 0.0))

    def test_demand_profile_is_piecewise_constant(self):
        demands = self.scenario.demands

        self.assertEqual(demands.flow(2, 2, 0.0), 0.3)
        self.assertEqual(demands.flow(2, 2, 299.0), 0.3)
        self.assertEqual(demands.flow(2, 2, 300.0), 0.5)
        self.assertEqual(demands.flow(2, 0, 10.0), 0.0)
        self.assertEqual(demands.links(), (1, 2))
        self.assertEqual(demands.vehicle_types(1), (0, 1))

    def test_serialize_then_parse_is_identity(self):
        text = serialize_scenario(self.scenario)

        self.assertEqual(parse_scenario(text), self.scenario)
        self.assertEqual(serialize_scenario(parse_scenario(text)), text)

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'scenario.json')
            save_scenario(self.scenario, path)

            self.assertEqual(load_scenario(path), self.scenario)

    def test_lane_groups_of_the_merge_link(self):
        link = self.scenario.links[3]
        groups = build_lane_groups(link, self.scenario.outgoing_connections(3),
                                   self.scenario.simulation.dt)

        self.assertEqual([g.id for g in groups], [3000, 3001])
        self.assertEqual(groups[0].lanes, (1, 2))
        self.assertEqual(groups[0].connections, (12,))
        self.assertEqual(groups[1].lanes, (3, 3))
        self.assertEqual(groups[1].connections, (12, 13))
        self.assertEqual(groups[0].cell_count, 10)
        self.assertEqual(groups[1].cell_length, 50.0)


class TestLaneGroups(unittest.TestCase):

    def test_single_connection_covering_all_lanes(self):
        groups = build_lane_groups(_link(3), [_connection(1, 1, 3)])

        self.assertEqual(len(groups), 1)
        self.assertEqual(groups[0].lanes, (1, 3))
        self.assertEqual(groups[0].lane_count, 3)

    def test_freeway_with_off_ramp(self):
        mainline = _connection(1, 1, 5)
        off_ramp = _connection(2, 4, 5)

        groups = build_lane_groups(_link(5), [mainline, off_ramp])

        self.assertEqual([g.lanes for g in groups], [(1, 3), (4, 5)])
        self.assertEqual([g.connections for g in groups], [(1,), (1, 2)])

    def test_one_connection_per_lane(self):
        groups = build_lane_groups(_link(2), [_connection(1, 1, 1), _connection(2, 2, 2)])

        self.assertEqual([g.lanes for g in groups], [(1, 1), (2, 2)])
        self.assertEqual([g.connections for g in groups], [(1,), (2,)])

    def test_sink_link_is_one_group(self):
        groups = build_lane_groups(_link(4), [])

        self.assertEqual(len(groups), 1)
        self.assertEqual(groups[0].connections, ())

    def test_overlaps(self):
        groups = build_lane_groups(_link(5), [_connection(1, 1, 5), _connection(2, 4, 5)])

        self.assertTrue(groups[0].overlaps((3, 4)))
        self.assertFalse(groups[0].overlaps((4, 5)))


class TestDiscretize(unittest.TestCase):

    def test_exact_division(self):
        self.assertEqual(discretize(_link(1, 500.0), 2.0), (10, 50.0))

    def test_one_free_flow_step(self):
        self.assertEqual(discretize(_link(1, 50.0), 2.0), (1, 50.0))

    def test_rounding(self):
        self.assertEqual(discretize(_link(1, 480.0), 2.0), (10, 48.0))

    def test_too_short(self):
        with self.assertRaises(ScenarioError):
            discretize(_link(1, 20.0), 2.0)
