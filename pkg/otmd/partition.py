"""Node partitioning, subnetwork fragments, the metagraph and decoder maps.

A partition assigns every node to one of ``n`` subsets. Links whose end
points fall in different subsets are overlap links: they are simulated in
full by both adjacent subnetworks, and each side resolves only the junction
it owns. The link is reported by the subnetwork that owns its start node.
"""
import math
import os
import random
import re

from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Mapping, NamedTuple, Tuple

import networkx as nx

from .engine import LinkModel, source_types, traversing_types
from .errors import PartitionError, ProtocolError
from .helpers import dump_json, load_json
from .logger import getLogger
from .scenario import (
    DemandProfile, Scenario, SplitMatrix, derive_nodes, load_scenario,
    save_scenario, validate_scenario,
)


BALANCE_TOLERANCE = 1.1
REFINEMENT_PASSES = 8


@dataclass(frozen=True)
class NodePartition:
    n: int
    assignment: Mapping[int, int]

    def subsets(self):
        parts = [[] for _ in range(self.n)]
        for node, part in sorted(self.assignment.items()):
            parts[part].append(node)
        return [tuple(p) for p in parts]


def node_graph(scenario):
    """Undirected node graph; edge weight counts the links between two nodes."""
    graph = nx.Graph()
    graph.add_nodes_from(sorted(scenario.nodes))
    for link in sorted(scenario.links.values(), key=lambda l: l.id):
        if graph.has_edge(link.start_node, link.end_node):
            graph[link.start_node][link.end_node]['weight'] += 1
        else:
            graph.add_edge(link.start_node, link.end_node, weight=1)
    return graph


def _pick_seed(graph, assignment, rng):
    unassigned = [v for v in graph.nodes if v not in assignment]
    bordering = [v for v in unassigned
                 if any(u in assignment for u in graph.neighbors(v))]
    candidates = bordering or unassigned

    def free_degree(v):
        return sum(1 for u in graph.neighbors(v) if u not in assignment)

    lowest = min(free_degree(v) for v in candidates)
    return rng.choice(sorted(v for v in candidates if free_degree(v) == lowest))


def _grow(graph, n, rng):
    total = graph.number_of_nodes()
    sizes = [total // n + (1 if p < total % n else 0) for p in range(n)]
    assignment = {}
    for part, size in enumerate(sizes):
        grown = 0
        frontier = deque()
        while grown < size:
            if not frontier:
                seed = _pick_seed(graph, assignment, rng)
                assignment[seed] = part
                grown += 1
                frontier.append(seed)
                continue
            node = frontier.popleft()
            for neighbor in sorted(graph.neighbors(node)):
                if grown >= size:
                    break
                if neighbor not in assignment:
                    assignment[neighbor] = part
                    grown += 1
                    frontier.append(neighbor)
    return assignment


def _connectivity(graph, assignment, node):
    weights = {}
    for neighbor, data in graph[node].items():
        part = assignment[neighbor]
        weights[part] = weights.get(part, 0) + data['weight']
    return weights


def _refine(graph, assignment, n):
    """Boundary moves and swaps that cut fewer links without breaking balance."""
    ceiling = math.ceil(BALANCE_TOLERANCE * graph.number_of_nodes() / n)
    sizes = [0] * n
    for part in assignment.values():
        sizes[part] += 1

    for _ in range(REFINEMENT_PASSES):
        improved = False
        for node in sorted(graph.nodes):
            home = assignment[node]
            weights = _connectivity(graph, assignment, node)
            internal = weights.get(home, 0)
            best = None
            for part in sorted(weights):
                gain = weights[part] - internal
                if part == home or gain <= 0:
                    continue
                if sizes[part] < ceiling and sizes[home] > 1:
                    if best is None or gain > best[0]:
                        best = (gain, part, None)
                    continue
                for other in sorted(graph.neighbors(node)):
                    if assignment[other] != part:
                        continue
                    other_weights = _connectivity(graph, assignment, other)
                    other_gain = other_weights.get(home, 0) - other_weights.get(part, 0)
                    swap_gain = gain + other_gain - 2 * graph[node][other]['weight']
                    if swap_gain > 0 and (best is None or swap_gain > best[0]):
                        best = (swap_gain, part, other)
            if best is None:
                continue
            _, part, other = best
            assignment[node] = part
            if other is None:
                sizes[home] -= 1
                sizes[part] += 1
            else:
                assignment[other] = home
            improved = True
        if not improved:
            break
    return assignment


def partition_nodes(scenario, n, seed=0):
    """Splits the nodes into ``n`` connected-as-possible, balanced subsets."""
    graph = node_graph(scenario)
    total = graph.number_of_nodes()
    if n < 1 or n > total:
        raise PartitionError('cannot split %d nodes into %d subnetworks' % (total, n))
    rng = random.Random(seed)
    assignment = _refine(graph, _grow(graph, n, rng), n)
    partition = NodePartition(n=n, assignment=dict(sorted(assignment.items())))
    getLogger(__name__).info('Partitioned network', extra={
        'n': n, 'seed': seed, 'nodes': total,
        'cut_links': len(cut_links(scenario, partition)),
    })
    return partition


def cut_links(scenario, partition):
    return tuple(lid for lid, link in sorted(scenario.links.items())
                 if partition.assignment[link.start_node] != partition.assignment[link.end_node])


_METIS_HEADER = re.compile(r'^%\s*ids\b(.*)$')


def load_partition(path, scenario):
    """Reads an externally computed partition.

    Two formats are understood: ``node subset`` pairs, one per line, and a
    METIS-style file with one subset per line preceded by a ``% ids ...``
    header listing the node ids in the same order.
    """
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    assignment = {}
    header = _METIS_HEADER.match(lines[0]) if lines else None
    try:
        if header:
            ids = [int(v) for v in header.group(1).split()]
            parts = [int(line) for line in lines[1:] if not line.startswith('%')]
            if len(ids) != len(parts):
                raise PartitionError('%s: %d ids but %d subsets' % (path, len(ids), len(parts)))
            assignment = dict(zip(ids, parts))
        else:
            for line in lines:
                if line.startswith('%') or line.startswith('#'):
                    continue
                node, part = (int(v) for v in line.split())
                if node in assignment:
                    raise PartitionError('%s: node %d assigned twice' % (path, node))
                assignment[node] = part
    except ValueError as err:
        raise PartitionError('%s: malformed partition file (%s)' % (path, err)) from err

    missing = sorted(set(scenario.nodes) - set(assignment))
    unknown = sorted(set(assignment) - set(scenario.nodes))
    if missing:
        raise PartitionError('%s: node %d has no subset' % (path, missing[0]))
    if unknown:
        raise PartitionError('%s: unknown node %d' % (path, unknown[0]))
    used = sorted(set(assignment.values()))
    if used != list(range(len(used))):
        raise PartitionError('%s: subsets must be numbered 0..n-1 without gaps' % path)
    return NodePartition(n=len(used), assignment=dict(sorted(assignment.items())))


def save_partition(partition, path):
    with open(path, 'w') as fh:
        for node, part in sorted(partition.assignment.items()):
            fh.write('%d %d\n' % (node, part))


@dataclass(frozen=True)
class Subnetwork:
    index: int
    nodes: Tuple[int, ...]
    interior_links: Tuple[int, ...]
    relative_sources: Mapping[int, int]
    relative_sinks: Mapping[int, int]
    relative_source_connections: Tuple[int, ...]
    relative_sink_connections: Tuple[int, ...]
    scenario: Scenario

    @property
    def neighbors(self):
        return tuple(sorted(set(self.relative_sources.values())
                            | set(self.relative_sinks.values())))

    @property
    def owned_links(self):
        return tuple(sorted(set(self.interior_links) | set(self.relative_sinks)))

    def route(self, link_id):
        """Neighbour that shares an overlap link."""
        if link_id in self.relative_sinks:
            return self.relative_sinks[link_id]
        return self.relative_sources[link_id]


def _fragment(scenario, nodes, local_links, connections):
    links = {lid: scenario.links[lid] for lid in sorted(local_links)}
    node_ids = set(nodes)
    for link in links.values():
        node_ids.update((link.start_node, link.end_node))
    conns = {cid: scenario.roadconnections[cid] for cid in sorted(connections)}
    external = {}
    for rc in conns.values():
        for lid in (rc.in_link, rc.out_link):
            if lid not in links:
                external[lid] = replace(scenario.links[lid], is_sink=False)

    rows = {}
    for key, value in scenario.splits.rows.items():
        node, in_link, _ = key
        if in_link in links and (node in nodes or scenario.links[in_link].start_node in nodes):
            rows[key] = value
    profiles = {key: value for key, value in scenario.demands.profiles.items()
                if key[0] in links and links[key[0]].start_node in nodes}

    return Scenario(
        nodes=derive_nodes(node_ids, links),
        links=links,
        roadconnections=conns,
        vehicletypes=dict(scenario.vehicletypes),
        splits=SplitMatrix(rows=dict(sorted(rows.items()))),
        demands=DemandProfile(profiles=dict(sorted(profiles.items()))),
        simulation=scenario.simulation,
        externallinks=dict(sorted(external.items())),
        fragment=True,
    )


def build_subnetworks(scenario, partition):
    """One self-contained fragment per subset, with its overlap links."""
    if set(partition.assignment) != set(scenario.nodes):
        raise PartitionError('partition does not cover the scenario nodes')
    assignment = partition.assignment
    subnetworks = []
    for index, subset in enumerate(partition.subsets()):
        if not subset:
            raise PartitionError('subnetwork %d is empty' % index)
        nodes = set(subset)
        interior, sources, sinks = [], {}, {}
        for lid, link in sorted(scenario.links.items()):
            starts, ends = link.start_node in nodes, link.end_node in nodes
            if starts and ends:
                interior.append(lid)
            elif ends:
                sources[lid] = assignment[link.start_node]
            elif starts:
                sinks[lid] = assignment[link.end_node]

        node_conns, sink_conns, source_conns = set(), set(), set()
        for cid, rc in scenario.roadconnections.items():
            if scenario.links[rc.in_link].end_node in nodes:
                node_conns.add(cid)
            if rc.in_link in sinks:
                sink_conns.add(cid)
            if rc.out_link in sources:
                source_conns.add(cid)

        local_links = set(interior) | set(sources) | set(sinks)
        fragment = _fragment(scenario, nodes, local_links,
                             node_conns | sink_conns | source_conns)
        validate_scenario(fragment)
        subnetworks.append(Subnetwork(
            index=index,
            nodes=tuple(subset),
            interior_links=tuple(interior),
            relative_sources=sources,
            relative_sinks=sinks,
            relative_source_connections=tuple(sorted(source_conns)),
            relative_sink_connections=tuple(sorted(sink_conns)),
            scenario=fragment,
        ))
    return subnetworks


@dataclass(frozen=True)
class Metagraph:
    n: int
    edges: Mapping[Tuple[int, int], Tuple[int, ...]]

    def neighbors(self, index):
        found = set()
        for i, j in self.edges:
            if i == index:
                found.add(j)
            elif j == index:
                found.add(i)
        return tuple(sorted(found))

    def to_dict(self):
        return {'n': self.n,
                'edges': [{'pair': list(pair), 'links': list(links)}
                          for pair, links in sorted(self.edges.items())]}

    @classmethod
    def from_dict(cls, doc):
        return cls(n=doc['n'], edges={tuple(e['pair']): tuple(e['links'])
                                      for e in doc['edges']})


def build_metagraph(subnetworks):
    edges = {}
    for sub in subnetworks:
        for lid, other in sub.relative_sinks.items():
            pair = (min(sub.index, other), max(sub.index, other))
            edges.setdefault(pair, set()).add(lid)
    return Metagraph(n=len(subnetworks),
                     edges={pair: tuple(sorted(links)) for pair, links in sorted(edges.items())})


class Slot(NamedTuple):
    connection: int
    lane_group: int
    vehicle_type: int
    next_link: int


@dataclass(frozen=True)
class DecoderMap:
    """Positions of the values in the messages ``sender`` sends ``receiver``."""
    sender: int
    receiver: int
    slots: Tuple[Slot, ...]

    @property
    def message_length(self):
        return len(self.slots)

    @cached_property
    def positions(self):
        return {slot: i for i, slot in enumerate(self.slots)}

    def to_dict(self):
        return {'sender': self.sender, 'receiver': self.receiver,
                'slots': [list(slot) for slot in self.slots]}

    @classmethod
    def from_dict(cls, doc):
        return cls(sender=doc['sender'], receiver=doc['receiver'],
                   slots=tuple(Slot(*slot) for slot in doc['slots']))

    def first_difference(self, other):
        """Description of where two maps disagree, or None when they match."""
        if (self.sender, self.receiver) != (other.sender, other.receiver):
            return 'maps describe %d->%d and %d->%d' % (
                self.sender, self.receiver, other.sender, other.receiver)
        for position, (mine, theirs) in enumerate(zip(self.slots, other.slots)):
            if mine != theirs:
                return 'slot %d is %s here but %s on the peer' % (
                    position, tuple(mine), tuple(theirs))
        if len(self.slots) != len(other.slots):
            return 'message length %d here but %d on the peer' % (
                len(self.slots), len(other.slots))
        return None


def build_decoder_map(view, sender, receiver):
    """Slot layout of sender->receiver messages, built from either side's view."""
    scenario = view.scenario
    if view.index == sender:
        entering = [lid for lid, j in view.relative_sinks.items() if j == receiver]
        leaving = [lid for lid, j in view.relative_sources.items() if j == receiver]
    elif view.index == receiver:
        entering = [lid for lid, j in view.relative_sources.items() if j == sender]
        leaving = [lid for lid, j in view.relative_sinks.items() if j == sender]
    else:
        raise PartitionError('subnetwork %d is neither sender %d nor receiver %d'
                             % (view.index, sender, receiver))

    slots = []
    for lid in sorted(entering):
        model = LinkModel(scenario, scenario.links[lid])
        for rc in scenario.incoming_connections(lid):
            types = traversing_types(scenario, rc.in_link, lid)
            for group in model.target_groups(rc):
                slots.extend(Slot(rc.id, group, c.vehicle_type, c.next_link)
                             for c in model.commodities if c.vehicle_type in types)
        if scenario.links[lid].is_source:
            types = source_types(scenario, lid)
            for group in model.lane_groups:
                slots.extend(Slot(-1, group.id, c.vehicle_type, c.next_link)
                             for c in model.commodities if c.vehicle_type in types)
    for lid in sorted(leaving):
        model = LinkModel(scenario, scenario.links[lid])
        for rc in model.outgoing:
            for group in model.upstream_groups(rc):
                slots.extend(Slot(rc.id, group, c.vehicle_type, c.next_link)
                             for c in model.commodities if c.next_link == rc.out_link)
    return DecoderMap(sender=sender, receiver=receiver, slots=tuple(sorted(slots)))


def build_decoder_maps(sub_i, sub_j):
    """Both directions between two adjacent subnetworks, each from its sender's view."""
    forward = build_decoder_map(sub_i, sub_i.index, sub_j.index)
    backward = build_decoder_map(sub_j, sub_j.index, sub_i.index)
    for view, expected in ((sub_j, forward), (sub_i, backward)):
        mirror = build_decoder_map(view, expected.sender, expected.receiver)
        difference = expected.first_difference(mirror)
        if difference:
            raise ProtocolError('decoder maps %d->%d disagree: %s'
                                % (expected.sender, expected.receiver, difference))
    return forward, backward


def all_decoder_maps(subnetworks, metagraph):
    maps = {}
    for i, j in metagraph.edges:
        forward, backward = build_decoder_maps(subnetworks[i], subnetworks[j])
        maps[(i, j)] = forward
        maps[(j, i)] = backward
    return maps


# ---------------------------------------------------------------- storage

def subnetwork_to_dict(sub):
    return {
        'index': sub.index,
        'nodes': list(sub.nodes),
        'interior_links': list(sub.interior_links),
        'relative_sources': [[lid, j] for lid, j in sorted(sub.relative_sources.items())],
        'relative_sinks': [[lid, j] for lid, j in sorted(sub.relative_sinks.items())],
        'relative_source_connections': list(sub.relative_source_connections),
        'relative_sink_connections': list(sub.relative_sink_connections),
    }


def save_distribution(out_dir, partition, subnetworks, metagraph, decoder_maps):
    """Writes fragments, the metagraph, decoder maps and the partition."""
    os.makedirs(out_dir, exist_ok=True)
    save_partition(partition, os.path.join(out_dir, 'partition.txt'))
    dump_json(metagraph.to_dict(), os.path.join(out_dir, 'metagraph.json'))
    for sub in subnetworks:
        save_scenario(sub.scenario, os.path.join(out_dir, 'fragment-%d.json' % sub.index))
        dump_json(subnetwork_to_dict(sub), os.path.join(out_dir, 'subnetwork-%d.json' % sub.index))
    for (i, j), decoder in sorted(decoder_maps.items()):
        dump_json(decoder.to_dict(), os.path.join(out_dir, 'decoders-%d-%d.json' % (i, j)))


def load_subnetwork(out_dir, index):
    doc = load_json(os.path.join(out_dir, 'subnetwork-%d.json' % index))
    return Subnetwork(
        index=doc['index'],
        nodes=tuple(doc['nodes']),
        interior_links=tuple(doc['interior_links']),
        relative_sources={lid: j for lid, j in doc['relative_sources']},
        relative_sinks={lid: j for lid, j in doc['relative_sinks']},
        relative_source_connections=tuple(doc['relative_source_connections']),
        relative_sink_connections=tuple(doc['relative_sink_connections']),
        scenario=load_scenario(os.path.join(out_dir, 'fragment-%d.json' % index)),
    )


def load_metagraph(out_dir):
    return Metagraph.from_dict(load_json(os.path.join(out_dir, 'metagraph.json')))


def load_decoder_maps(out_dir, index, metagraph):
    maps = {}
    for j in metagraph.neighbors(index):
        for pair in ((index, j), (j, index)):
            path = os.path.join(out_dir, 'decoders-%d-%d.json' % pair)
            maps[pair] = DecoderMap.from_dict(load_json(path))
    return maps


def load_distribution(out_dir):
    """Partition, subnetworks, metagraph and decoder maps of a fragments directory."""
    try:
        metagraph = load_metagraph(out_dir)
        subnetworks = [load_subnetwork(out_dir, i) for i in range(metagraph.n)]
        decoder_maps = {}
        for sub in subnetworks:
            decoder_maps.update(load_decoder_maps(out_dir, sub.index, metagraph))
    except OSError as err:
        raise PartitionError('%s is not a fragments directory: %s'
                             % (out_dir, err.strerror or err)) from err
    assignment = {node: sub.index for sub in subnetworks for node in sub.nodes}
    partition = NodePartition(n=metagraph.n, assignment=dict(sorted(assignment.items())))
    return partition, subnetworks, metagraph, decoder_maps


def merge_fragments(subnetworks):
    """The scenario the subnetworks were cut from."""
    node_ids, links, connections = set(), {}, {}
    vehicletypes, rows, profiles = {}, {}, {}
    for sub in subnetworks:
        fragment = sub.scenario
        node_ids.update(fragment.nodes)
        links.update(fragment.links)
        connections.update(fragment.roadconnections)
        vehicletypes.update(fragment.vehicletypes)
        rows.update(fragment.splits.rows)
        profiles.update(fragment.demands.profiles)
    links = dict(sorted(links.items()))
    scenario = Scenario(
        nodes=derive_nodes(node_ids, links),
        links=links,
        roadconnections=dict(sorted(connections.items())),
        vehicletypes=dict(sorted(vehicletypes.items())),
        splits=SplitMatrix(rows=dict(sorted(rows.items()))),
        demands=DemandProfile(profiles=dict(sorted(profiles.items()))),
        simulation=subnetworks[0].scenario.simulation,
    )
    validate_scenario(scenario)
    return scenario
