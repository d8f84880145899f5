"""Cell-transmission update of one subnetwork.

One step runs in two phases. ``phase_a`` applies lane changes, computes the
flows between the cells of every lane group, resolves the node model at
every owned node and injects source queues; it returns the packets that
cross into neighbouring subnetworks. ``phase_b`` takes the packets received
from the neighbours and commits the new state.

Sums that feed the state are evaluated in a fixed order (commodities in
canonical order, packets in ascending connection id with source injection
first) so that any partitioning of a network reproduces the single-process
result bit for bit.
"""
import math

from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple

import numpy as np

from .errors import ConfigurationError, InternalError, ProtocolError
from .logger import getLogger
from .scenario import build_lane_groups


NO_NEXT_LINK = -1
SOURCE_CONNECTION = -1
CONSERVATION_TOLERANCE = 1e-9
NEGATIVE_TOLERANCE = 1e-12


class Commodity(NamedTuple):
    vehicle_type: int
    next_link: int


@dataclass(frozen=True)
class CellGeometry:
    lanes: int
    cell_length: float
    dt: float

    def capacity(self, fd):
        """Vehicles that may leave the cell in one step."""
        return fd.capacity * self.lanes * self.dt

    def jam(self, fd):
        return fd.jam_density * self.lanes * self.cell_length


@dataclass
class FluxPacket:
    connection: int
    lane_group: int
    flows: Dict[Commodity, float] = field(default_factory=dict)

    def total(self):
        total = 0.0
        for value in self.flows.values():
            total += value
        return total


@dataclass
class NodeFlows:
    packets: List[FluxPacket]
    departures: List[FluxPacket]


@dataclass
class PhaseResult:
    supplies: Dict[int, float]
    demands: Dict[int, np.ndarray]
    outbound: List[FluxPacket]


@dataclass
class StepMetrics:
    step: int
    in_network: float
    entered: float
    exited: float
    queued: float


def row_totals(cells):
    """Per-cell vehicle totals, adding commodity columns left to right."""
    cells = np.asarray(cells, dtype=float)
    total = np.zeros(cells.shape[0])
    for column in range(cells.shape[1]):
        total = total + cells[:, column]
    return total


def _cell_total(cell):
    total = 0.0
    for value in cell:
        total += float(value)
    return total


def compute_demand(cell, fd, geometry):
    """Per-commodity sending flow of one cell, proportional to its contents."""
    cell = np.asarray(cell, dtype=float)
    total = _cell_total(cell)
    if total <= 0:
        return np.zeros_like(cell)
    sending = min(total, geometry.capacity(fd))
    return cell * (sending / total)


def compute_supply(cell, fd, geometry):
    total = _cell_total(cell)
    room = fd.wave_ratio * (geometry.jam(fd) - total)
    return max(0.0, min(geometry.capacity(fd), room))


def link_commodities(scenario, link_id):
    """Canonical (vehicle type, next link) list carried by a link."""
    successors = scenario.successors(link_id)
    commodities = []
    for vt in sorted(scenario.vehicletypes.values(), key=lambda v: v.id):
        if vt.is_probabilistic:
            if successors:
                commodities.extend(Commodity(vt.id, s) for s in successors)
            else:
                commodities.append(Commodity(vt.id, NO_NEXT_LINK))
            continue
        path = vt.routing.path
        if link_id in path:
            position = path.index(link_id)
            following = path[position + 1] if position + 1 < len(path) else NO_NEXT_LINK
            commodities.append(Commodity(vt.id, following))
    return tuple(sorted(commodities))


def traversing_types(scenario, in_link, out_link):
    """Vehicle types that may move from ``in_link`` to ``out_link``."""
    types = []
    for vt in sorted(scenario.vehicletypes.values(), key=lambda v: v.id):
        if vt.is_probabilistic:
            types.append(vt.id)
            continue
        path = vt.routing.path
        if in_link in path:
            position = path.index(in_link)
            if position + 1 < len(path) and path[position + 1] == out_link:
                types.append(vt.id)
    return tuple(types)


def source_types(scenario, link_id):
    """Vehicle types that may be injected on a source link."""
    types = []
    for vt in sorted(scenario.vehicletypes.values(), key=lambda v: v.id):
        if vt.is_probabilistic or vt.routing.path[0] == link_id:
            types.append(vt.id)
    return tuple(types)


class LinkModel:
    """Lane groups, geometry and commodity layout of one simulated link."""

    def __init__(self, scenario, link):
        self.link = link
        self.dt = scenario.simulation.dt
        self.outgoing = scenario.outgoing_connections(link.id)
        self.successors = scenario.successors(link.id)
        self.is_sink = not self.outgoing
        self.end_node = link.end_node
        self.lane_groups = tuple(build_lane_groups(link, self.outgoing, self.dt))
        self.geometries = tuple(CellGeometry(g.lane_count, g.cell_length, self.dt)
                                for g in self.lane_groups)
        self.commodities = link_commodities(scenario, link.id)
        self.column = {c: i for i, c in enumerate(self.commodities)}
        self.source_types = source_types(scenario, link.id)

        self.path_next = {}
        for vt in scenario.vehicletypes.values():
            if vt.is_probabilistic:
                continue
            path = vt.routing.path
            if link.id in path:
                position = path.index(link.id)
                self.path_next[vt.id] = (path[position + 1]
                                         if position + 1 < len(path) else NO_NEXT_LINK)
        self.probabilistic = {vt.id for vt in scenario.vehicletypes.values()
                              if vt.is_probabilistic}

        by_out_link = {rc.out_link: rc.id for rc in self.outgoing}
        self.connection_columns = {}
        for rc in self.outgoing:
            self.connection_columns[rc.id] = np.array(
                [i for i, c in enumerate(self.commodities) if c.next_link == rc.out_link],
                dtype=int)
        self._served = np.zeros((len(self.lane_groups), len(self.commodities)), dtype=bool)
        for gi, group in enumerate(self.lane_groups):
            for ci, commodity in enumerate(self.commodities):
                rc_id = by_out_link.get(commodity.next_link)
                self._served[gi, ci] = (commodity.next_link == NO_NEXT_LINK
                                        or rc_id in group.connections)
        self.lane_change_direction = self._lane_change_directions()

    def _lane_change_directions(self):
        groups, count = self._served.shape
        direction = np.zeros((groups, count), dtype=int)
        for ci in range(count):
            serving = np.flatnonzero(self._served[:, ci])
            if serving.size == 0:
                continue
            for gi in range(groups):
                if self._served[gi, ci]:
                    continue
                nearest = min(serving, key=lambda s: (abs(s - gi), s))
                direction[gi, ci] = 1 if nearest > gi else -1
        return direction

    def empty_state(self):
        return [np.zeros((g.cell_count, len(self.commodities))) for g in self.lane_groups]

    def target_groups(self, connection):
        """Lane groups of this link that a connection entering it feeds."""
        return tuple(g.id for g in self.lane_groups if g.overlaps(connection.out_lanes))

    def upstream_groups(self, connection):
        """Lane groups of this link that a connection leaving it drains."""
        return tuple(g.id for g in self.lane_groups if connection.id in g.connections)

    def cell_flows(self, index, cells):
        """Internal flows, last-cell demand and first-cell supply of a lane group."""
        fd = self.link.fd
        geometry = self.geometries[index]
        capacity = geometry.capacity(fd)
        totals = row_totals(cells)
        sending = np.minimum(totals, capacity)
        supply = np.maximum(0.0, np.minimum(capacity, fd.wave_ratio * (geometry.jam(fd) - totals)))
        positive = totals > 0

        demand_ratio = np.zeros_like(totals)
        np.divide(sending, totals, out=demand_ratio, where=positive)
        moved = np.minimum(sending[:-1], supply[1:])
        flow_ratio = np.zeros_like(moved)
        np.divide(moved, totals[:-1], out=flow_ratio, where=positive[:-1])

        internal = cells[:-1] * flow_ratio[:, None]
        last_demand = cells[-1] * demand_ratio[-1]
        return internal, last_demand, float(supply[0])

    def routing(self, vehicle_type, splits, time):
        """[(next link, share)] for vehicles of a type entering this link."""
        if self.is_sink:
            return ((NO_NEXT_LINK, 1.0),)
        if vehicle_type in self.path_next:
            return ((self.path_next[vehicle_type], 1.0),)
        if vehicle_type not in self.probabilistic:
            raise ConfigurationError('vehicle type %d has no route through link %d'
                                     % (vehicle_type, self.link.id))
        distribution = splits.distribution(self.end_node, self.link.id, vehicle_type, time)
        if distribution is None:
            if len(self.successors) == 1:
                return ((self.successors[0], 1.0),)
            raise ConfigurationError(
                'no split for vehicle type %d at node %d leaving link %d'
                % (vehicle_type, self.end_node, self.link.id))
        return distribution


def compute_connection_demands(last_cell_demand, lane_group, model):
    """Splits a lane group's last-cell demand among its road connections.

    Each commodity goes to the connection whose out link is its next link;
    commodities the group cannot serve contribute nothing.
    """
    demand = np.asarray(last_cell_demand, dtype=float)
    for ci, commodity in enumerate(model.commodities):
        if demand[ci] <= 0:
            continue
        valid = (commodity.next_link in model.successors
                 or (model.is_sink and commodity.next_link == NO_NEXT_LINK))
        if not valid:
            raise ConfigurationError('commodity %s on link %d leads to link %d which '
                                     'is not a successor'
                                     % (commodity, model.link.id, commodity.next_link))
    result = {}
    for rc_id in lane_group.connections:
        columns = model.connection_columns[rc_id]
        result[rc_id] = {model.commodities[ci]: demand[ci] for ci in columns}
    return result


def update_states(cells, internal, inflow, outflow):
    """Conservation update of one lane group.

    ``internal`` holds the flows between consecutive cells, ``inflow`` what
    enters the first cell and ``outflow`` what leaves the last one. Values
    below zero by no more than the rounding tolerance are clamped.
    """
    cells = np.asarray(cells, dtype=float)
    in_cells = np.zeros_like(cells)
    out_cells = np.zeros_like(cells)
    in_cells[0] = inflow
    in_cells[1:] = internal
    out_cells[:-1] = internal
    out_cells[-1] = outflow
    updated = (cells + in_cells) - out_cells

    lowest = updated.min() if updated.size else 0.0
    if lowest < -NEGATIVE_TOLERANCE:
        raise InternalError('went negative (%r)' % float(lowest))
    updated[updated < 0] = 0.0
    return updated


def apply_lane_changes(states, model, rate):
    """Moves a fraction of misplaced vehicles one lane group toward their exit.

    Desired moves are taken from the pre-change state and scaled per target
    cell so that the target never exceeds jam occupancy.
    """
    states = [np.array(s, dtype=float) for s in states]
    groups = len(states)
    if groups < 2 or rate <= 0:
        return states
    fd = model.link.fd
    direction = model.lane_change_direction
    rightward = [rate * states[g] * (direction[g] == 1)[None, :] for g in range(groups)]
    leftward = [rate * states[g] * (direction[g] == -1)[None, :] for g in range(groups)]

    scale = []
    for t in range(groups):
        desired = np.zeros(states[t].shape[0])
        if t > 0:
            desired = desired + row_totals(rightward[t - 1])
        if t < groups - 1:
            desired = desired + row_totals(leftward[t + 1])
        room = np.maximum(0.0, model.geometries[t].jam(fd) - row_totals(states[t]))
        factor = np.ones_like(desired)
        np.divide(room, desired, out=factor, where=desired > room)
        scale.append(factor)

    result = [s.copy() for s in states]
    for g in range(groups):
        if g < groups - 1:
            moved = rightward[g] * scale[g + 1][:, None]
            result[g] = result[g] - moved
            result[g + 1] = result[g + 1] + moved
        if g > 0:
            moved = leftward[g] * scale[g - 1][:, None]
            result[g] = result[g] - moved
            result[g - 1] = result[g - 1] + moved
    return result


def resolve_node_flows(node, demands, supplies, targets):
    """Node model: shares downstream supply among incoming connections.

    ``demands`` maps (connection, upstream lane group) to per-commodity
    vehicles, ``supplies`` maps downstream lane groups to vehicles and
    ``targets`` maps each connection to the downstream groups it feeds.
    Each connection's demand is spread over its targets in proportion to
    their supply; a target receiving more than it can take scales every
    contribution by the same factor.
    """
    per_connection = {}
    for rc_id, upstream in sorted(demands):
        aggregate = per_connection.setdefault(rc_id, {})
        for commodity, value in demands[(rc_id, upstream)].items():
            aggregate[commodity] = aggregate.get(commodity, 0.0) + value

    weights = {}
    group_demand = {}
    for rc_id in sorted(per_connection):
        feeds = tuple(sorted(targets[rc_id]))
        room = 0.0
        for group in feeds:
            room += supplies[group]
        total = 0.0
        for value in per_connection[rc_id].values():
            total += value
        weights[rc_id] = {g: (supplies[g] / room if room > 0 else 0.0) for g in feeds}
        for group in feeds:
            group_demand[group] = group_demand.get(group, 0.0) + total * weights[rc_id][group]

    factor = {}
    for group, wanted in group_demand.items():
        factor[group] = 1.0 if wanted <= supplies[group] else supplies[group] / wanted

    packets, departures = [], []
    for rc_id in sorted(per_connection):
        served = 0.0
        for group in sorted(weights[rc_id]):
            share = weights[rc_id][group] * factor[group]
            packets.append(FluxPacket(rc_id, group, {
                commodity: value * share
                for commodity, value in per_connection[rc_id].items()}))
            served += share
        for key in sorted(k for k in demands if k[0] == rc_id):
            departures.append(FluxPacket(rc_id, key[1], {
                commodity: value * served for commodity, value in demands[key].items()}))
    return NodeFlows(packets, departures)


def assign_downstream(packet, model, splits, time):
    """Retags a packet entering ``model``'s link with each vehicle's next link."""
    assigned = {}
    for commodity, value in packet.flows.items():
        for next_link, share in model.routing(commodity.vehicle_type, splits, time):
            key = (commodity.vehicle_type, next_link)
            assigned[key] = assigned.get(key, 0.0) + value * share
    result = {}
    for commodity in model.commodities:
        if commodity in assigned:
            result[commodity] = assigned.pop(commodity)
    if assigned:
        raise ConfigurationError('link %d cannot carry commodities %s'
                                 % (model.link.id, sorted(assigned)))
    return FluxPacket(packet.connection, packet.lane_group, result)


class SubnetworkEngine:
    """Simulation state of the links of a scenario, advanced two phases at a time.

    ``owned_nodes`` are the nodes whose junction flows this engine resolves;
    links leaving an owned node are owned for reporting. Links ending or
    starting outside the owned nodes are replicas exchanged with
    ``neighbors``.
    """

    def __init__(self, scenario, owned_nodes=None, neighbors=()):
        self.scenario = scenario
        self.dt = scenario.simulation.dt
        self.rate = scenario.simulation.lane_change_rate
        if owned_nodes is None:
            owned_nodes = scenario.nodes
        self.owned_nodes = tuple(sorted(owned_nodes))
        owned = set(self.owned_nodes)
        self.neighbors = tuple(sorted(neighbors))

        self.models = {lid: LinkModel(scenario, link)
                       for lid, link in sorted(scenario.links.items())}
        self.group_link = {}
        self.group_index = {}
        for lid, model in self.models.items():
            for gi, group in enumerate(model.lane_groups):
                self.group_link[group.id] = lid
                self.group_index[group.id] = gi

        self.owned_links = tuple(lid for lid, link in scenario.links.items()
                                 if link.start_node in owned)
        self.outbound_entry_links = frozenset(
            lid for lid, link in scenario.links.items() if link.end_node not in owned)
        self.outbound_exit_links = frozenset(
            lid for lid, link in scenario.links.items() if link.start_node not in owned)

        self.node_connections = {}
        for rc in sorted(scenario.roadconnections.values(), key=lambda c: c.id):
            if rc.in_link not in self.models or rc.out_link not in self.models:
                continue
            node = scenario.links[rc.in_link].end_node
            if node in owned:
                self.node_connections.setdefault(node, []).append(rc)
        self.targets = {}
        for conns in self.node_connections.values():
            for rc in conns:
                self.targets[rc.id] = self.models[rc.out_link].target_groups(rc)

        self.source_links = tuple(
            lid for lid in scenario.demands.links()
            if lid in self.models and scenario.links[lid].start_node in owned)

        self.states = {}
        for model in self.models.values():
            for group, cells in zip(model.lane_groups, model.empty_state()):
                self.states[group.id] = cells
        self.queues = {lid: np.zeros(len(self.models[lid].commodities))
                       for lid in self.source_links}
        self.step_index = 0
        self.entered_total = 0.0
        self.exited_total = 0.0
        self.outflows = {}
        self._pending = None

    @property
    def time(self):
        return self.step_index * self.dt

    def _inject(self, lid, supplies, entering, time):
        model = self.models[lid]
        splits = self.scenario.splits
        queue = self.queues[lid]
        arrivals = np.zeros(len(model.commodities))
        for vt in self.scenario.demands.vehicle_types(lid):
            flow = self.scenario.demands.flow(lid, vt, time)
            if flow <= 0:
                continue
            offer = FluxPacket(SOURCE_CONNECTION, model.lane_groups[0].id,
                               {Commodity(vt, lid): flow * self.dt})
            for commodity, value in assign_downstream(offer, model, splits, time).flows.items():
                arrivals[model.column[commodity]] += value
        queue = queue + arrivals

        remaining = {}
        room = 0.0
        for group in model.lane_groups:
            remaining[group.id] = max(0.0, supplies[group.id] - entering.get(group.id, 0.0))
            room += remaining[group.id]
        waiting = _cell_total(queue)
        injected = min(waiting, room)

        packets = []
        taken = np.zeros_like(queue)
        if injected > 0:
            injectable = [c for c in model.commodities if c.vehicle_type in model.source_types]
            for group in model.lane_groups:
                share = injected * (remaining[group.id] / room)
                part = queue * (share / waiting)
                taken = taken + part
                packets.append(FluxPacket(SOURCE_CONNECTION, group.id, {
                    c: float(part[model.column[c]]) for c in injectable}))
        return packets, np.maximum(queue - taken, 0.0), injected

    def phase_a(self):
        if self._pending is not None:
            raise InternalError('phase a of step %d already ran' % self.step_index)
        time = self.time
        splits = self.scenario.splits

        work = {}
        internal = {}
        demands = {}
        supplies = {}
        for lid, model in self.models.items():
            before = [self.states[g.id] for g in model.lane_groups]
            after = apply_lane_changes(before, model, self.rate)
            for gi, (group, cells) in enumerate(zip(model.lane_groups, after)):
                work[group.id] = cells
                flows, last_demand, supply = model.cell_flows(gi, cells)
                internal[group.id] = flows
                demands[group.id] = last_demand
                supplies[group.id] = supply

        entries = []
        departures = []
        for node in sorted(self.node_connections):
            connections = self.node_connections[node]
            local = {rc.id for rc in connections}
            node_demands = {}
            node_targets = {}
            node_supplies = {}
            for in_link in sorted({rc.in_link for rc in connections}):
                model = self.models[in_link]
                for group in model.lane_groups:
                    split = compute_connection_demands(demands[group.id], group, model)
                    for rc_id, flows in split.items():
                        if rc_id in local:
                            node_demands[(rc_id, group.id)] = flows
            for rc in connections:
                node_targets[rc.id] = self.targets[rc.id]
                for group in self.targets[rc.id]:
                    node_supplies[group] = supplies[group]
            if not node_demands:
                continue
            flows = resolve_node_flows(node, node_demands, node_supplies, node_targets)
            entries.extend(flows.packets)
            departures.extend(flows.departures)

        entering = {}
        for packet in sorted(entries, key=lambda p: (p.lane_group, p.connection)):
            entering[packet.lane_group] = entering.get(packet.lane_group, 0.0) + packet.total()

        injections = []
        queues = {}
        injected = 0.0
        for lid in self.source_links:
            packets, queues[lid], amount = self._inject(lid, supplies, entering, time)
            injections.extend(packets)
            injected += amount

        local_entries = []
        outbound = []
        for packet in entries:
            lid = self.group_link[packet.lane_group]
            if lid in self.outbound_entry_links:
                packet = assign_downstream(packet, self.models[lid], splits, time)
                outbound.append(packet)
            local_entries.append(packet)
        for packet in injections:
            if self.group_link[packet.lane_group] in self.outbound_entry_links:
                outbound.append(packet)
        for packet in departures:
            if self.group_link[packet.lane_group] in self.outbound_exit_links:
                outbound.append(packet)

        self._pending = {
            'work': work,
            'internal': internal,
            'demands': demands,
            'entries': local_entries + injections,
            'departures': departures,
            'queues': queues,
            'injected': injected,
        }
        return PhaseResult(supplies=supplies, demands=demands, outbound=outbound)

    def phase_b(self, received=None):
        """Commits the step; ``received`` maps neighbour index to packets."""
        if self._pending is None:
            raise InternalError('phase b of step %d ran before phase a' % self.step_index)
        received = received or {}
        missing = [j for j in self.neighbors if j not in received]
        if missing:
            raise ProtocolError('step %d: no boundary packets from worker(s) %s'
                                % (self.step_index, missing))
        pending = self._pending
        time = self.time
        splits = self.scenario.splits

        incoming = {}
        outgoing = {}
        for packet in pending['entries']:
            lid = self.group_link[packet.lane_group]
            if packet.connection != SOURCE_CONNECTION and lid not in self.outbound_entry_links:
                packet = assign_downstream(packet, self.models[lid], splits, time)
            incoming.setdefault(packet.lane_group, []).append(packet)
        for packet in pending['departures']:
            outgoing.setdefault(packet.lane_group, []).append(packet)
        for neighbor in sorted(received):
            for packet in received[neighbor]:
                lid = self.group_link.get(packet.lane_group)
                if lid is None:
                    raise ProtocolError('worker %d sent a packet for unknown lane group %d'
                                        % (neighbor, packet.lane_group))
                rc = self.scenario.roadconnections.get(packet.connection)
                if packet.connection == SOURCE_CONNECTION or (rc and rc.out_link == lid):
                    incoming.setdefault(packet.lane_group, []).append(packet)
                elif rc and rc.in_link == lid:
                    outgoing.setdefault(packet.lane_group, []).append(packet)
                else:
                    raise ProtocolError('worker %d sent connection %d for lane group %d'
                                        % (neighbor, packet.connection, packet.lane_group))

        new_states = {}
        inflow_values = []
        outflow_values = []
        link_outflows = {}
        exited = 0.0
        owned = set(self.owned_links)
        for lid, model in self.models.items():
            for group in model.lane_groups:
                cells = pending['work'][group.id]
                flows = pending['internal'][group.id]
                inflow = np.zeros(len(model.commodities))
                for packet in sorted(incoming.get(group.id, []), key=lambda p: p.connection):
                    for commodity, value in packet.flows.items():
                        inflow[model.column[commodity]] += value
                if model.is_sink:
                    outflow = pending['demands'][group.id]
                    if lid in owned:
                        exited += _cell_total(outflow)
                else:
                    outflow = np.zeros(len(model.commodities))
                    for packet in sorted(outgoing.get(group.id, []), key=lambda p: p.connection):
                        for commodity, value in packet.flows.items():
                            outflow[model.column[commodity]] += value

                try:
                    new_states[group.id] = update_states(cells, flows, inflow, outflow)
                except InternalError as err:
                    raise InternalError('step %d: lane group %d %s'
                                        % (self.step_index, group.id, err.message)) from err
                inflow_values.append(inflow)
                outflow_values.append(outflow)
                link_outflows.setdefault(lid, []).append(_cell_total(outflow))

        self._check_conservation(new_states, inflow_values, outflow_values)

        self.states = new_states
        self.queues.update(pending['queues'])
        self.outflows = {lid: math.fsum(values) for lid, values in link_outflows.items()}
        self.entered_total += pending['injected']
        self.exited_total += exited
        metrics = StepMetrics(
            step=self.step_index + 1,
            in_network=self.vehicles_in_network(),
            entered=self.entered_total,
            exited=self.exited_total,
            queued=math.fsum(_cell_total(q) for q in self.queues.values()),
        )
        self.step_index += 1
        self._pending = None
        return metrics

    def _check_conservation(self, new_states, inflow_values, outflow_values):
        def fsum(arrays):
            if not arrays:
                return 0.0
            return math.fsum(np.concatenate([a.ravel() for a in arrays]).tolist())

        before = fsum(list(self.states.values()))
        after = fsum(list(new_states.values()))
        balance = fsum(inflow_values) - fsum(outflow_values)
        if abs((after - before) - balance) > CONSERVATION_TOLERANCE:
            raise InternalError('step %d: conservation violated, state changed by %r '
                                'but boundary flows sum to %r'
                                % (self.step_index, after - before, balance))

    def step(self):
        """Advances a subnetwork without neighbours by one step."""
        self.phase_a()
        return self.phase_b({})

    def vehicles_in_network(self, links=None):
        links = self.owned_links if links is None else links
        arrays = [self.states[g.id] for lid in links for g in self.models[lid].lane_groups]
        if not arrays:
            return 0.0
        return math.fsum(np.concatenate([a.ravel() for a in arrays]).tolist())

    def link_density(self, lid):
        """Vehicles per meter on a link."""
        model = self.models[lid]
        return self.vehicles_in_network([lid]) / model.link.length

    def link_flow(self, lid):
        """Vehicles per second that left a link during the last step."""
        return self.outflows.get(lid, 0.0) / self.dt

    def source_queues(self):
        """Vehicles waiting to enter each owned source link."""
        return {lid: _cell_total(queue) for lid, queue in sorted(self.queues.items())}

    def state_rows(self, links=None):
        """(link, lane group, cell, vehicle type, next link, vehicles) in canonical order."""
        links = self.owned_links if links is None else links
        rows = []
        for lid in sorted(links):
            model = self.models[lid]
            for group in model.lane_groups:
                cells = self.states[group.id]
                for cell in range(cells.shape[0]):
                    for ci, commodity in enumerate(model.commodities):
                        rows.append((lid, group.id, cell, commodity.vehicle_type,
                                     commodity.next_link, float(cells[cell, ci]) + 0.0))
        return rows


def log_step(metrics):
    getLogger(__name__).debug('Step finished', extra={
        'step': metrics.step, 'in_network': metrics.in_network,
        'entered': metrics.entered, 'exited': metrics.exited, 'queued': metrics.queued,
    })
