"""Synthetic benchmark networks: a rectangular arrangement of 2x2 junction tiles.

Junctions sit on a ``2 * rows`` by ``2 * cols`` lattice, numbered
``r * (2 * cols) + c``. Neighbouring junctions are joined by one link per
direction; on even lattice rows the horizontal connection passes through an
intermediate node, giving two links per direction. Every junction on the
lattice boundary gets a source link from its own origin node and a sink link
to its own destination node.
"""
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .logger import getLogger
from .scenario import (
    DemandProfile, FDParams, Link, Probabilistic, RoadConnection, Scenario,
    SimulationParams, SplitMatrix, VehicleType, derive_nodes, validate_scenario,
)


DEFAULT_DEMAND_VPH_PER_LANE = 2000.0
VEHICLE_TYPE = 0


@dataclass(frozen=True)
class LinkParams:
    length: float = 250.0
    lanes: int = 1
    fd: FDParams = field(default_factory=lambda: FDParams(
        capacity=0.5,
        free_flow_speed=25.0,
        congestion_wave_speed=6.25,
        jam_density=0.125,
    ))


def uniform_splits(node, in_link, successors):
    share = 1.0 / len(successors)
    return [(out_link, share) for out_link in successors]


def expected_size(rows, cols):
    """(nodes, links) produced by ``generate_grid(rows, cols)``."""
    boundary = 4 * rows + 4 * cols - 4
    nodes = 4 * rows * cols + rows * (2 * cols - 1) + 2 * boundary
    links = 6 * rows * (2 * cols - 1) + 4 * cols * (2 * rows - 1) + 2 * boundary
    return nodes, links


class _Builder:

    def __init__(self, params):
        self.params = params
        self.links = {}
        self.node_ids = []

    def node(self):
        nid = len(self.node_ids)
        self.node_ids.append(nid)
        return nid

    def link(self, start, end, length, is_source=False):
        lid = len(self.links) + 1
        self.links[lid] = Link(
            id=lid, start_node=start, end_node=end, length=length,
            lanes=self.params.lanes, fd=self.params.fd, is_source=is_source)
        return lid


def generate_grid(rows, cols, link_params=None, demand=DEFAULT_DEMAND_VPH_PER_LANE,
                  splits=uniform_splits, simulation=None):
    """Builds a grid scenario of ``rows`` by ``cols`` tiles.

    ``demand`` is vehicles per hour per lane on every source link and
    ``splits`` maps (node, in_link, successors) to [(out_link, p), ...] at
    every junction with more than one successor.
    """
    if rows < 1 or cols < 1:
        raise ConfigurationError('grid needs at least one tile per side, got %dx%d'
                                 % (rows, cols))
    if demand < 0:
        raise ConfigurationError('demand must be non-negative')
    params = link_params or LinkParams()
    simulation = simulation or SimulationParams(dt=2.0, steps=100)
    log = getLogger(__name__)

    jrows, jcols = 2 * rows, 2 * cols
    builder = _Builder(params)
    junction = [[builder.node() for c in range(jcols)] for r in range(jrows)]

    for r in range(jrows):
        for c in range(jcols - 1):
            west, east = junction[r][c], junction[r][c + 1]
            if r % 2 == 0:
                mid = builder.node()
                half = params.length / 2
                builder.link(west, mid, half)
                builder.link(mid, east, half)
                builder.link(east, mid, half)
                builder.link(mid, west, half)
            else:
                builder.link(west, east, params.length)
                builder.link(east, west, params.length)

    for c in range(jcols):
        for r in range(jrows - 1):
            north, south = junction[r][c], junction[r + 1][c]
            builder.link(north, south, params.length)
            builder.link(south, north, params.length)

    source_links = []
    for r in range(jrows):
        for c in range(jcols):
            if 0 < r < jrows - 1 and 0 < c < jcols - 1:
                continue
            origin, destination = builder.node(), builder.node()
            source_links.append(
                builder.link(origin, junction[r][c], params.length, is_source=True))
            builder.link(junction[r][c], destination, params.length)

    links = builder.links
    ending_at = {}
    starting_at = {}
    for link in links.values():
        ending_at.setdefault(link.end_node, []).append(link)
        starting_at.setdefault(link.start_node, []).append(link)

    lanes = (1, params.lanes)
    connections = {}
    split_rows = {}
    for node in builder.node_ids:
        for in_link in ending_at.get(node, []):
            successors = [out.id for out in starting_at.get(node, [])
                          if out.end_node != in_link.start_node]
            for out_id in successors:
                cid = len(connections) + 1
                connections[cid] = RoadConnection(cid, in_link.id, out_id, lanes, lanes)
            if len(successors) > 1:
                pairs = tuple(sorted(splits(node, in_link.id, successors)))
                split_rows[(node, in_link.id, VEHICLE_TYPE)] = ((0.0, pairs),)

    flow = demand / 3600.0 * params.lanes
    profiles = {(lid, VEHICLE_TYPE): ((0.0, flow),) for lid in source_links}

    has_outgoing = {rc.in_link for rc in connections.values()}
    links = {lid: Link(l.id, l.start_node, l.end_node, l.length, l.lanes, l.fd,
                       is_source=l.is_source, is_sink=lid not in has_outgoing)
             for lid, l in links.items()}

    scenario = Scenario(
        nodes=derive_nodes(builder.node_ids, links),
        links=links,
        roadconnections=connections,
        vehicletypes={VEHICLE_TYPE: VehicleType(VEHICLE_TYPE, Probabilistic())},
        splits=SplitMatrix(rows=dict(sorted(split_rows.items()))),
        demands=DemandProfile(profiles=profiles),
        simulation=simulation,
    )
    validate_scenario(scenario)

    log.info('Generated grid', extra={
        'rows': rows, 'cols': cols,
        'nodes': len(scenario.nodes), 'links': len(scenario.links),
    })
    return scenario
