import os
import unittest

import otmd

from ..scenario import scenario_from_dict


path = os.path.dirname(__file__)
MERGE_DIVERGE = os.path.join(path, 'resources/merge_diverge.json')
MERGE_DIVERGE_PARTITION = os.path.join(path, 'resources/merge_diverge.part')
PATH4 = os.path.join(path, 'resources/path4.json')
PATH4_METIS = os.path.join(path, 'resources/path4.metis')
MINIMAL = os.path.join(path, 'resources/minimal.json')

SLOW_TESTS = os.getenv('OTMD_SLOW_TESTS', '') == '1'
slow = unittest.skipUnless(SLOW_TESTS, 'set OTMD_SLOW_TESTS=1 to run')

DEFAULT_FD = {
    'capacity': 0.5,
    'free_flow_speed': 25.0,
    'congestion_wave_speed': 6.25,
    'jam_density': 0.125,
}


def clean_otmd_config():
    environments_to_clean = [
        'OTMD_LOG',
        'OTMD_LOG_PROVIDER',
        'OTMD_LOG_URL',
        'OTMD_LOG_PORT',
        'OTMD_APP_NAME',
        'OTMD_RUN',
    ]
    for env in environments_to_clean:
        if env in os.environ:
            del os.environ[env]

    otmd.config.reset()


def add_tracker_id_to_message(message):
    message['tracker_id_global'] = 'tracker_id_value_global'
    return message


def link_doc(lid, start, end, length=250.0, lanes=1, fd=None, **extra):
    doc = {'id': lid, 'start_node': start, 'end_node': end, 'length': length,
           'lanes': lanes, 'fd': dict(fd or DEFAULT_FD)}
    doc.update(extra)
    return doc


def scenario_doc(nodes, links, connections=(), vehicletypes=None, splits=(),
                 demands=(), dt=2.0, steps=20, lane_change_rate=0.5):
    return {
        'nodes': [{'id': n} for n in nodes],
        'links': list(links),
        'roadconnections': list(connections),
        'vehicletypes': list(vehicletypes or [{'id': 0, 'routing': 'probabilistic'}]),
        'splits': list(splits),
        'demands': list(demands),
        'simulation': {'dt': dt, 'steps': steps, 'lane_change_rate': lane_change_rate},
    }


def single_link_scenario(length=500.0, lanes=1, fd=None, demand=None, dt=2.0, steps=20):
    """One link from node 0 to node 1; with ``demand`` (veh/s) it is also a source."""
    demands = []
    if demand is not None:
        demands.append({'link': 1, 'vehicle_type': 0, 'profile': [[0.0, demand]]})
    return scenario_from_dict(scenario_doc(
        [0, 1], [link_doc(1, 0, 1, length, lanes, fd)], demands=demands,
        dt=dt, steps=steps))


def fork_scenario(split_lanes=True, splits=((2, 0.7), (3, 0.3)), vehicletypes=None):
    """Two-lane link 1 diverging into links 2 and 3 at node 1.

    With ``split_lanes`` lane 1 only reaches link 2 and lane 2 only link 3,
    otherwise both lanes reach both links.
    """
    lanes_a, lanes_b = ([1, 1], [2, 2]) if split_lanes else ([1, 2], [1, 2])
    split_rows = []
    if splits:
        split_rows.append({'node': 1, 'in_link': 1, 'vehicle_type': 0, 'rows': [
            {'time': 0.0, 'probabilities': [list(p) for p in splits]}]})
    return scenario_from_dict(scenario_doc(
        [0, 1, 2, 3],
        [link_doc(1, 0, 1, 100.0, lanes=2), link_doc(2, 1, 2, 100.0),
         link_doc(3, 1, 3, 100.0)],
        connections=[
            {'id': 1, 'in_link': 1, 'out_link': 2, 'in_lanes': lanes_a, 'out_lanes': [1, 1]},
            {'id': 2, 'in_link': 1, 'out_link': 3, 'in_lanes': lanes_b, 'out_lanes': [1, 1]},
        ],
        vehicletypes=vehicletypes,
        splits=split_rows,
    ))


def network_scenario(edges, demand=0.2, steps=20):
    """Single-lane network from (link id, start node, end node) triples.

    Every in-link connects to every out-link at its end node except the
    reverse direction; one probabilistic vehicle type splits uniformly and
    links without predecessors carry ``demand`` veh/s.
    """
    nodes = sorted({n for _, start, end in edges for n in (start, end)})
    links = [link_doc(lid, start, end) for lid, start, end in edges]
    connections, split_rows = [], []
    has_predecessor = set()
    for lid, start, end in edges:
        successors = [out for out, s, e in edges if s == end and e != start]
        for out in successors:
            connections.append({'id': len(connections) + 1, 'in_link': lid,
                                'out_link': out, 'in_lanes': [1, 1], 'out_lanes': [1, 1]})
            has_predecessor.add(out)
        if len(successors) > 1:
            share = 1.0 / len(successors)
            split_rows.append({'node': end, 'in_link': lid, 'vehicle_type': 0, 'rows': [
                {'time': 0.0, 'probabilities': [[out, share] for out in successors]}]})
    demands = [{'link': lid, 'vehicle_type': 0, 'profile': [[0.0, demand]]}
               for lid, _, _ in edges if lid not in has_predecessor and demand]
    return scenario_from_dict(scenario_doc(nodes, links, connections, splits=split_rows,
                                           demands=demands, steps=steps))
