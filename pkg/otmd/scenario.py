"""Network/scenario data model, the scenario JSON format, lane groups and cells.

The file format is documented in ``docs/scenario-format.md``. Lane indices are
1-based and ranges are inclusive. All quantities are SI: meters, seconds,
vehicles.
"""
import bisect
import json
import math

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Tuple, Union

from .errors import ScenarioError


SPLIT_TOLERANCE = 1e-12
LANE_GROUP_STRIDE = 1000
DEFAULT_LANE_CHANGE_RATE = 0.5

TOP_LEVEL_KEYS = ('nodes', 'links', 'roadconnections', 'vehicletypes',
                  'splits', 'demands', 'simulation')


@dataclass(frozen=True)
class FDParams:
    """Triangular fundamental diagram, per lane."""
    capacity: float
    free_flow_speed: float
    congestion_wave_speed: float
    jam_density: float

    @property
    def wave_ratio(self):
        return self.congestion_wave_speed / self.free_flow_speed


@dataclass(frozen=True)
class Node:
    id: int
    incoming: Tuple[int, ...] = ()
    outgoing: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Link:
    id: int
    start_node: int
    end_node: int
    length: float
    lanes: int
    fd: FDParams
    is_source: bool = False
    is_sink: bool = False


@dataclass(frozen=True)
class RoadConnection:
    id: int
    in_link: int
    out_link: int
    in_lanes: Tuple[int, int]
    out_lanes: Tuple[int, int]


@dataclass(frozen=True)
class Deterministic:
    path: Tuple[int, ...]


@dataclass(frozen=True)
class Probabilistic:
    """Routed at every junction by the split matrix."""


@dataclass(frozen=True)
class VehicleType:
    id: int
    routing: Union[Deterministic, Probabilistic]

    @property
    def is_probabilistic(self):
        return isinstance(self.routing, Probabilistic)


SplitKey = Tuple[int, int, int]
SplitRow = Tuple[float, Tuple[Tuple[int, float], ...]]


@dataclass(frozen=True)
class SplitMatrix:
    """(node, in_link, vehicle type) -> rows of (start time, {out_link: p})."""
    rows: Mapping[SplitKey, Tuple[SplitRow, ...]] = field(default_factory=dict)

    def distribution(self, node, in_link, vehicle_type, time):
        rows = self.rows.get((node, in_link, vehicle_type))
        if not rows:
            return None
        times = [start for start, _ in rows]
        return rows[bisect.bisect_right(times, time) - 1][1]


@dataclass(frozen=True)
class DemandProfile:
    """(source link, vehicle type) -> piecewise-constant (start time, veh/s)."""
    profiles: Mapping[Tuple[int, int], Tuple[Tuple[float, float], ...]] = field(
        default_factory=dict)

    def flow(self, link, vehicle_type, time):
        profile = self.profiles.get((link, vehicle_type))
        if not profile:
            return 0.0
        times = [start for start, _ in profile]
        position = bisect.bisect_right(times, time) - 1
        if position < 0:
            return 0.0
        return profile[position][1]

    def links(self):
        return tuple(sorted({link for link, _ in self.profiles}))

    def vehicle_types(self, link):
        return tuple(sorted(vt for lid, vt in self.profiles if lid == link))


@dataclass(frozen=True)
class LaneGroup:
    id: int
    link: int
    lanes: Tuple[int, int]
    connections: Tuple[int, ...]
    cell_count: int
    cell_length: float

    @property
    def lane_count(self):
        return self.lanes[1] - self.lanes[0] + 1

    def overlaps(self, lanes):
        return self.lanes[0] <= lanes[1] and lanes[0] <= self.lanes[1]


@dataclass(frozen=True)
class SimulationParams:
    dt: float
    steps: int
    lane_change_rate: float = DEFAULT_LANE_CHANGE_RATE


@dataclass(frozen=True)
class Scenario:
    nodes: Mapping[int, Node]
    links: Mapping[int, Link]
    roadconnections: Mapping[int, RoadConnection]
    vehicletypes: Mapping[int, VehicleType]
    splits: SplitMatrix
    demands: DemandProfile
    simulation: SimulationParams
    externallinks: Mapping[int, Link] = field(default_factory=dict)
    fragment: bool = False

    @cached_property
    def _outgoing(self):
        index = {}
        for rc in sorted(self.roadconnections.values(), key=lambda c: c.id):
            index.setdefault(rc.in_link, []).append(rc)
        return {lid: tuple(conns) for lid, conns in index.items()}

    @cached_property
    def _incoming(self):
        index = {}
        for rc in sorted(self.roadconnections.values(), key=lambda c: c.id):
            index.setdefault(rc.out_link, []).append(rc)
        return {lid: tuple(conns) for lid, conns in index.items()}

    def outgoing_connections(self, link_id):
        return self._outgoing.get(link_id, ())

    def incoming_connections(self, link_id):
        return self._incoming.get(link_id, ())

    def successors(self, link_id):
        return tuple(sorted({rc.out_link for rc in self.outgoing_connections(link_id)}))

    def known_link(self, link_id):
        if link_id in self.links:
            return self.links[link_id]
        return self.externallinks.get(link_id)


def build_lane_groups(link: Link, outgoing, dt: Optional[float] = None):
    """Groups adjacent lanes that reach the same set of road connections.

    A link without outgoing connections (a sink) yields a single group. When
    ``dt`` is given the groups carry the link's cell discretization, otherwise
    one cell spanning the link.
    """
    lane_sets = []
    for lane in range(1, link.lanes + 1):
        reached = sorted(rc.id for rc in outgoing
                         if rc.in_lanes[0] <= lane <= rc.in_lanes[1])
        lane_sets.append(tuple(reached))

    if dt is None:
        cell_count, cell_length = 1, link.length
    else:
        cell_count, cell_length = discretize(link, dt)

    groups = []
    first = 1
    for lane in range(2, link.lanes + 2):
        if lane <= link.lanes and lane_sets[lane - 1] == lane_sets[first - 1]:
            continue
        groups.append(LaneGroup(
            id=link.id * LANE_GROUP_STRIDE + len(groups),
            link=link.id,
            lanes=(first, lane - 1),
            connections=lane_sets[first - 1],
            cell_count=cell_count,
            cell_length=cell_length,
        ))
        first = lane
    return groups


def discretize(link: Link, dt: float):
    """Cell count and length: round(length / (v * dt)), at least one cell."""
    step_distance = link.fd.free_flow_speed * dt
    ratio = link.length / step_distance
    if ratio < 0.5:
        raise ScenarioError(
            'CFL condition violated on link %d: free-flow step %g m exceeds '
            'length %g m' % (link.id, step_distance, link.length))
    cell_count = max(1, int(math.floor(ratio + 0.5)))
    return cell_count, link.length / cell_count


# ---------------------------------------------------------------- parsing

def _where(kind, obj):
    if isinstance(obj, dict) and 'id' in obj:
        return '%s %s' % (kind, obj['id'])
    return kind


def _require(obj, key, where):
    if not isinstance(obj, dict):
        raise ScenarioError('%s must be an object' % where)
    if key not in obj:
        raise ScenarioError("missing key '%s' in %s" % (key, where))
    return obj[key]


def _as_id(value, where):
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ScenarioError('%s: ids must be non-negative integers, got %r'
                            % (where, value))
    return value


def _as_number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError('%s: expected a number, got %r' % (where, value))
    return float(value)


def _as_range(value, where):
    if not isinstance(value, list) or len(value) != 2:
        raise ScenarioError('%s: lane range must be [first, last]' % where)
    first, last = (_as_id(v, where) for v in value)
    return first, last


def _list(doc, key):
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise ScenarioError("'%s' must be a list" % key)
    return value


def _unique(items, kind):
    index = {}
    for item in items:
        if item.id in index:
            raise ScenarioError('duplicate %s id %d' % (kind, item.id))
        index[item.id] = item
    return dict(sorted(index.items()))


def _parse_fd(doc, where):
    return FDParams(
        capacity=_as_number(_require(doc, 'capacity', where), where),
        free_flow_speed=_as_number(_require(doc, 'free_flow_speed', where), where),
        congestion_wave_speed=_as_number(
            _require(doc, 'congestion_wave_speed', where), where),
        jam_density=_as_number(_require(doc, 'jam_density', where), where),
    )


def _parse_link(doc):
    where = _where('link', doc)
    lanes = _require(doc, 'lanes', where)
    if isinstance(lanes, bool) or not isinstance(lanes, int):
        raise ScenarioError('%s: lanes must be an integer' % where)
    return Link(
        id=_as_id(_require(doc, 'id', where), where),
        start_node=_as_id(_require(doc, 'start_node', where), where),
        end_node=_as_id(_require(doc, 'end_node', where), where),
        length=_as_number(_require(doc, 'length', where), where),
        lanes=lanes,
        fd=_parse_fd(_require(doc, 'fd', where), where),
        is_source=bool(doc.get('is_source', False)),
    )


def _parse_connection(doc):
    where = _where('road connection', doc)
    return RoadConnection(
        id=_as_id(_require(doc, 'id', where), where),
        in_link=_as_id(_require(doc, 'in_link', where), where),
        out_link=_as_id(_require(doc, 'out_link', where), where),
        in_lanes=_as_range(_require(doc, 'in_lanes', where), where),
        out_lanes=_as_range(_require(doc, 'out_lanes', where), where),
    )


def _parse_vehicle_type(doc):
    where = _where('vehicle type', doc)
    routing = _require(doc, 'routing', where)
    if routing == 'deterministic':
        path = _require(doc, 'path', where)
        if not isinstance(path, list) or not path:
            raise ScenarioError('%s: deterministic path must be a non-empty list'
                                % where)
        mode = Deterministic(path=tuple(_as_id(lid, where) for lid in path))
    elif routing == 'probabilistic':
        mode = Probabilistic()
    else:
        raise ScenarioError("%s: routing must be 'deterministic' or "
                            "'probabilistic', got %r" % (where, routing))
    return VehicleType(id=_as_id(_require(doc, 'id', where), where), routing=mode)


def _parse_splits(items):
    rows = {}
    for doc in items:
        where = 'split'
        key = (_as_id(_require(doc, 'node', where), where),
               _as_id(_require(doc, 'in_link', where), where),
               _as_id(_require(doc, 'vehicle_type', where), where))
        where = 'split (node %d, in_link %d, vehicle type %d)' % key
        if key in rows:
            raise ScenarioError('duplicate %s' % where)
        parsed = []
        for row in _require(doc, 'rows', where):
            start = _as_number(_require(row, 'time', where), where)
            pairs = []
            for pair in _require(row, 'probabilities', where):
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ScenarioError('%s: probabilities are [out_link, p] pairs'
                                        % where)
                pairs.append((_as_id(pair[0], where), _as_number(pair[1], where)))
            parsed.append((start, tuple(sorted(pairs))))
        rows[key] = tuple(parsed)
    return SplitMatrix(rows=dict(sorted(rows.items())))


def _parse_demands(items):
    profiles = {}
    for doc in items:
        where = 'demand'
        key = (_as_id(_require(doc, 'link', where), where),
               _as_id(_require(doc, 'vehicle_type', where), where))
        where = 'demand (link %d, vehicle type %d)' % key
        if key in profiles:
            raise ScenarioError('duplicate %s' % where)
        profile = []
        for pair in _require(doc, 'profile', where):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ScenarioError('%s: profile entries are [time, flow] pairs'
                                    % where)
            profile.append((_as_number(pair[0], where), _as_number(pair[1], where)))
        profiles[key] = tuple(profile)
    return DemandProfile(profiles=dict(sorted(profiles.items())))


def _parse_simulation(doc):
    where = 'simulation'
    steps = _require(doc, 'steps', where)
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise ScenarioError('simulation: steps must be an integer')
    rate = doc.get('lane_change_rate', DEFAULT_LANE_CHANGE_RATE)
    return SimulationParams(
        dt=_as_number(_require(doc, 'dt', where), where),
        steps=steps,
        lane_change_rate=_as_number(rate, where),
    )


def derive_nodes(node_ids, links):
    """Nodes with incoming/outgoing link lists derived from ``links``."""
    incoming = {nid: [] for nid in node_ids}
    outgoing = {nid: [] for nid in node_ids}
    for link in sorted(links.values(), key=lambda l: l.id):
        if link.start_node in outgoing:
            outgoing[link.start_node].append(link.id)
        if link.end_node in incoming:
            incoming[link.end_node].append(link.id)
    return {nid: Node(nid, tuple(incoming[nid]), tuple(outgoing[nid]))
            for nid in sorted(node_ids)}


def scenario_from_dict(doc):
    if not isinstance(doc, dict):
        raise ScenarioError('scenario must be a JSON object')
    for key in TOP_LEVEL_KEYS:
        if key not in doc:
            raise ScenarioError("missing top-level key '%s'" % key)

    node_ids = []
    for item in _list(doc, 'nodes'):
        node_ids.append(_as_id(_require(item, 'id', 'node'), 'node'))
    if len(set(node_ids)) != len(node_ids):
        duplicate = next(n for n in node_ids if node_ids.count(n) > 1)
        raise ScenarioError('duplicate node id %d' % duplicate)

    links = _unique((_parse_link(item) for item in _list(doc, 'links')), 'link')
    external = _unique((_parse_link(item) for item in _list(doc, 'externallinks')),
                       'external link')
    connections = _unique(
        (_parse_connection(item) for item in _list(doc, 'roadconnections')),
        'road connection')
    vehicletypes = _unique(
        (_parse_vehicle_type(item) for item in _list(doc, 'vehicletypes')),
        'vehicle type')
    splits = _parse_splits(_list(doc, 'splits'))
    demands = _parse_demands(_list(doc, 'demands'))
    simulation = _parse_simulation(_require(doc, 'simulation', 'scenario'))

    demand_links = set(demands.links())
    has_outgoing = {rc.in_link for rc in connections.values()}
    links = {
        lid: Link(link.id, link.start_node, link.end_node, link.length,
                  link.lanes, link.fd,
                  is_source=link.is_source or lid in demand_links,
                  is_sink=lid not in has_outgoing)
        for lid, link in links.items()
    }

    scenario = Scenario(
        nodes=derive_nodes(node_ids, links),
        links=links,
        roadconnections=connections,
        vehicletypes=vehicletypes,
        splits=splits,
        demands=demands,
        simulation=simulation,
        externallinks=external,
        fragment=bool(doc.get('fragment', False)),
    )
    validate_scenario(scenario)
    return scenario


def parse_scenario(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError('syntax error at line %d column %d: %s'
                            % (err.lineno, err.colno, err.msg)) from err
    return scenario_from_dict(doc)


def load_scenario(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ScenarioError('cannot read scenario %s: %s' % (path, err.strerror or err)) from err
    return parse_scenario(text)


# ------------------------------------------------------------- validation

def _validate_fd(link):
    fd = link.fd
    where = 'link %d' % link.id
    for name in ('capacity', 'free_flow_speed', 'congestion_wave_speed',
                 'jam_density'):
        if getattr(fd, name) <= 0:
            raise ScenarioError('%s: %s must be positive' % (where, name))
    if fd.congestion_wave_speed > fd.free_flow_speed:
        raise ScenarioError('%s: congestion_wave_speed must not exceed '
                            'free_flow_speed' % where)
    critical = fd.capacity / fd.free_flow_speed + fd.capacity / fd.congestion_wave_speed
    if critical > fd.jam_density * (1 + 1e-12):
        raise ScenarioError('%s: triangle does not fit under jam density '
                            '(%g > %g)' % (where, critical, fd.jam_density))


def _validate_link(scenario, link, simulated):
    where = 'link %d' % link.id
    if link.length <= 0:
        raise ScenarioError('%s: length must be positive' % where)
    if link.lanes < 1 or link.lanes >= LANE_GROUP_STRIDE:
        raise ScenarioError('%s: lanes must be between 1 and %d'
                            % (where, LANE_GROUP_STRIDE - 1))
    if link.start_node == link.end_node:
        raise ScenarioError('%s: start_node equals end_node' % where)
    _validate_fd(link)
    if not simulated:
        return
    for node in (link.start_node, link.end_node):
        if node not in scenario.nodes:
            raise ScenarioError('%s references unknown node %d' % (where, node))
    step_distance = link.fd.free_flow_speed * scenario.simulation.dt
    if step_distance > link.length * (1 + 1e-12):
        raise ScenarioError('CFL condition violated on link %d: free-flow step '
                            '%g m exceeds length %g m'
                            % (link.id, step_distance, link.length))


def _validate_connections(scenario):
    pairs = {}
    for rc in scenario.roadconnections.values():
        where = 'road connection %d' % rc.id
        in_link = scenario.known_link(rc.in_link)
        out_link = scenario.known_link(rc.out_link)
        if in_link is None:
            raise ScenarioError('%s references unknown link %d' % (where, rc.in_link))
        if out_link is None:
            raise ScenarioError('%s references unknown link %d' % (where, rc.out_link))
        if rc.in_link not in scenario.links and rc.out_link not in scenario.links:
            raise ScenarioError('%s joins two external links' % where)
        if in_link.end_node != out_link.start_node:
            raise ScenarioError('%s: end node of link %d is not the start node '
                                'of link %d' % (where, rc.in_link, rc.out_link))
        for lanes, link in ((rc.in_lanes, in_link), (rc.out_lanes, out_link)):
            if not 1 <= lanes[0] <= lanes[1] <= link.lanes:
                raise ScenarioError('%s: lane range %s outside link %d lanes 1-%d'
                                    % (where, list(lanes), link.id, link.lanes))
        pair = (rc.in_link, rc.out_link)
        if pair in pairs:
            raise ScenarioError('%s duplicates road connection %d between links '
                                '%d and %d' % (where, pairs[pair], pair[0], pair[1]))
        pairs[pair] = rc.id


def _validate_vehicle_types(scenario):
    for vt in scenario.vehicletypes.values():
        if vt.is_probabilistic:
            continue
        where = 'vehicle type %d' % vt.id
        path = vt.routing.path
        if len(set(path)) != len(path):
            raise ScenarioError('%s: path repeats a link' % where)
        if not scenario.fragment:
            for lid in path:
                if lid not in scenario.links:
                    raise ScenarioError('%s references unknown link %d'
                                        % (where, lid))
        for upstream, downstream in zip(path, path[1:]):
            if upstream not in scenario.links:
                continue
            if downstream not in scenario.successors(upstream):
                raise ScenarioError('%s: path is not connected between links '
                                    '%d and %d' % (where, upstream, downstream))
        last = path[-1]
        if last in scenario.links and not scenario.links[last].is_sink:
            raise ScenarioError('%s: path must end on a sink link, link %d has '
                                'successors' % (where, last))


def _validate_splits(scenario):
    for (node, in_link, vt_id), rows in scenario.splits.rows.items():
        where = 'split (node %d, in_link %d, vehicle type %d)' % (node, in_link, vt_id)
        link = scenario.known_link(in_link)
        if link is None:
            raise ScenarioError('%s references unknown link %d' % (where, in_link))
        if link.end_node != node:
            raise ScenarioError('%s: link %d does not end at node %d'
                                % (where, in_link, node))
        if vt_id not in scenario.vehicletypes:
            raise ScenarioError('%s references unknown vehicle type %d'
                                % (where, vt_id))
        if not scenario.vehicletypes[vt_id].is_probabilistic:
            raise ScenarioError('%s: vehicle type %d is deterministic' % (where, vt_id))
        successors = scenario.successors(in_link)
        if rows and rows[0][0] != 0:
            raise ScenarioError('%s: the first row must start at time 0' % where)
        previous = None
        for start, probabilities in rows:
            if start < 0 or (previous is not None and start <= previous):
                raise ScenarioError('%s: row times must be increasing and '
                                    'non-negative' % where)
            previous = start
            total = 0.0
            for out_link, p in probabilities:
                if out_link not in successors:
                    raise ScenarioError('%s: out_link %d not reachable from link '
                                        '%d' % (where, out_link, in_link))
                if p < 0:
                    raise ScenarioError('%s: negative probability' % where)
                total += p
            if abs(total - 1.0) > SPLIT_TOLERANCE:
                raise ScenarioError('%s: distribution sums to %g' % (where, total))


def _validate_demands(scenario):
    for (lid, vt_id), profile in scenario.demands.profiles.items():
        where = 'demand (link %d, vehicle type %d)' % (lid, vt_id)
        if lid not in scenario.links:
            raise ScenarioError('%s references unknown link %d' % (where, lid))
        if vt_id not in scenario.vehicletypes:
            raise ScenarioError('%s references unknown vehicle type %d'
                                % (where, vt_id))
        link = scenario.links[lid]
        if scenario.incoming_connections(lid) and not link.is_source:
            raise ScenarioError('%s: link %d has predecessors and is not flagged '
                                'as a source' % (where, lid))
        vt = scenario.vehicletypes[vt_id]
        if not vt.is_probabilistic and vt.routing.path[0] != lid:
            raise ScenarioError('%s: deterministic demand must enter on the first '
                                'link of its path' % where)
        previous = None
        for start, flow in profile:
            if flow < 0:
                raise ScenarioError('%s: negative flow' % where)
            if previous is not None and start <= previous:
                raise ScenarioError('%s: breakpoint times must be increasing' % where)
            previous = start


def validate_scenario(scenario):
    sim = scenario.simulation
    if sim.dt <= 0:
        raise ScenarioError('simulation: dt must be positive')
    if sim.steps < 1:
        raise ScenarioError('simulation: steps must be at least 1')
    if not 0.0 <= sim.lane_change_rate <= 1.0:
        raise ScenarioError('simulation: lane_change_rate must be within [0, 1]')
    for lid in scenario.externallinks:
        if lid in scenario.links:
            raise ScenarioError('link %d is both simulated and external' % lid)
    for link in scenario.links.values():
        _validate_link(scenario, link, simulated=True)
    for link in scenario.externallinks.values():
        _validate_link(scenario, link, simulated=False)
    _validate_connections(scenario)
    _validate_vehicle_types(scenario)
    _validate_splits(scenario)
    _validate_demands(scenario)


# ---------------------------------------------------------- serialization

def _link_to_dict(link):
    return {
        'id': link.id,
        'start_node': link.start_node,
        'end_node': link.end_node,
        'length': link.length,
        'lanes': link.lanes,
        'is_source': link.is_source,
        'fd': {
            'capacity': link.fd.capacity,
            'free_flow_speed': link.fd.free_flow_speed,
            'congestion_wave_speed': link.fd.congestion_wave_speed,
            'jam_density': link.fd.jam_density,
        },
    }


def _vehicle_type_to_dict(vt):
    if vt.is_probabilistic:
        return {'id': vt.id, 'routing': 'probabilistic'}
    return {'id': vt.id, 'routing': 'deterministic', 'path': list(vt.routing.path)}


def scenario_to_dict(scenario):
    doc = {
        'nodes': [{'id': nid} for nid in sorted(scenario.nodes)],
        'links': [_link_to_dict(scenario.links[lid]) for lid in sorted(scenario.links)],
        'roadconnections': [
            {'id': rc.id, 'in_link': rc.in_link, 'out_link': rc.out_link,
             'in_lanes': list(rc.in_lanes), 'out_lanes': list(rc.out_lanes)}
            for _, rc in sorted(scenario.roadconnections.items())
        ],
        'vehicletypes': [_vehicle_type_to_dict(scenario.vehicletypes[v])
                         for v in sorted(scenario.vehicletypes)],
        'splits': [
            {'node': node, 'in_link': in_link, 'vehicle_type': vt,
             'rows': [{'time': start, 'probabilities': [list(p) for p in probs]}
                      for start, probs in rows]}
            for (node, in_link, vt), rows in sorted(scenario.splits.rows.items())
        ],
        'demands': [
            {'link': lid, 'vehicle_type': vt, 'profile': [list(p) for p in profile]}
            for (lid, vt), profile in sorted(scenario.demands.profiles.items())
        ],
        'simulation': {
            'dt': scenario.simulation.dt,
            'steps': scenario.simulation.steps,
            'lane_change_rate': scenario.simulation.lane_change_rate,
        },
    }
    if scenario.fragment:
        doc['fragment'] = True
        doc['externallinks'] = [_link_to_dict(scenario.externallinks[lid])
                                for lid in sorted(scenario.externallinks)]
    return doc


def serialize_scenario(scenario):
    return json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + '\n'


def save_scenario(scenario, path):
    with open(path, 'w') as fh:
        fh.write(serialize_scenario(scenario))
