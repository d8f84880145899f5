"""Neighbour channels and the per-step boundary exchange.

Each step every worker sends one data frame to each neighbour and receives
one from each. A frame holds the values of the sender's boundary packets laid
out by the pair's decoder map; zeros stand for slots without flow.
"""
import json
import time

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import Commodity, FluxPacket
from .errors import ProtocolError
from .logger import getLogger
from .partition import DecoderMap, Slot
from .wire import HANDSHAKE_STEP, pack_frame, pack_values, unpack_frame, unpack_values


DEFAULT_TIMEOUT = 30.0


@dataclass
class BoundaryMessage:
    step: int
    values: np.ndarray


@dataclass
class NeighborChannel:
    local: int
    neighbor: int
    send_map: DecoderMap
    recv_map: DecoderMap
    endpoint: object

    @property
    def send_length(self):
        return self.send_map.message_length

    @property
    def recv_length(self):
        return self.recv_map.message_length


def _concurrently(channels, send):
    """Runs ``send(channel)`` for every channel on its own thread."""
    pool = ThreadPoolExecutor(max_workers=len(channels))
    futures = [pool.submit(send, channels[j]) for j in sorted(channels)]
    return pool, futures


def _abort(channels, pool):
    for channel in channels.values():
        channel.endpoint.close()
    pool.shutdown(wait=False)


def _handshake(channels, timeout):
    def send(channel):
        payload = json.dumps({'send': channel.send_map.to_dict(),
                              'recv': channel.recv_map.to_dict()}).encode()
        channel.endpoint.send_frame(
            pack_frame(HANDSHAKE_STEP, channel.local, channel.neighbor, payload))

    pool, futures = _concurrently(channels, send)
    try:
        for j in sorted(channels):
            channel = channels[j]
            step, sender, _, payload = unpack_frame(channel.endpoint.recv_frame(timeout))
            if step != HANDSHAKE_STEP or sender != j:
                raise ProtocolError('expected decoder maps from worker %d, got step %d '
                                    'from worker %d' % (j, step, sender))
            theirs = json.loads(payload.decode())
            checks = ((channel.recv_map, DecoderMap.from_dict(theirs['send'])),
                      (channel.send_map, DecoderMap.from_dict(theirs['recv'])))
            for mine, peer in checks:
                difference = mine.first_difference(peer)
                if difference:
                    raise ProtocolError('decoder map %d->%d mismatch with worker %d: %s'
                                        % (mine.sender, mine.receiver, j, difference))
        for future in futures:
            future.result()
    except BaseException:
        _abort(channels, pool)
        raise
    pool.shutdown()


def establish(metagraph, index, transport, decoder_maps, timeout=DEFAULT_TIMEOUT,
              timings=None):
    """Connects to every metagraph neighbour and cross-checks decoder maps.

    ``decoder_maps`` maps (sender, receiver) pairs to maps. When ``timings``
    is a dict it receives the seconds spent connecting and handshaking.
    """
    neighbors = metagraph.neighbors(index)
    timings = timings if timings is not None else {}
    if not neighbors:
        timings.update(communicator=0.0, decoders=0.0)
        return {}
    for j in neighbors:
        for pair in ((index, j), (j, index)):
            if pair not in decoder_maps:
                raise ProtocolError('no decoder map for %d->%d' % pair)

    started = time.perf_counter()
    endpoints = transport.connect(index, neighbors, timeout)
    connected = time.perf_counter()
    channels = {j: NeighborChannel(index, j, decoder_maps[(index, j)],
                                   decoder_maps[(j, index)], endpoints[j])
                for j in neighbors}
    _handshake(channels, timeout)
    timings.update(communicator=connected - started,
                   decoders=time.perf_counter() - connected)
    getLogger(__name__).info('Channels established', extra={
        'neighbors': list(neighbors),
        'message_lengths': {str(j): c.send_length for j, c in channels.items()},
    })
    return channels


def encode(packets, channel, step=0):
    positions = channel.send_map.positions
    values = np.zeros(channel.send_length)
    for packet in packets:
        for commodity, value in packet.flows.items():
            slot = Slot(packet.connection, packet.lane_group,
                        commodity.vehicle_type, commodity.next_link)
            position = positions.get(slot)
            if position is None:
                raise ProtocolError('no slot for %s in messages %d->%d'
                                    % (tuple(slot), channel.local, channel.neighbor))
            values[position] = value
    return BoundaryMessage(step=step, values=values)


def decode(message, channel):
    if len(message.values) != channel.recv_length:
        raise ProtocolError('message from worker %d has %d values, expected %d'
                            % (channel.neighbor, len(message.values), channel.recv_length))
    packets = []
    current = None
    for position in np.flatnonzero(message.values):
        slot = channel.recv_map.slots[position]
        if current is None or (current.connection, current.lane_group) != slot[:2]:
            current = FluxPacket(slot.connection, slot.lane_group, {})
            packets.append(current)
        current.flows[Commodity(slot.vehicle_type, slot.next_link)] = float(
            message.values[position])
    return packets


def _receive(channel, step, timeout):
    frame_step, sender, receiver, payload = unpack_frame(channel.endpoint.recv_frame(timeout))
    if sender != channel.neighbor or receiver != channel.local:
        raise ProtocolError('frame for %d->%d arrived on the channel from worker %d'
                            % (sender, receiver, channel.neighbor))
    if frame_step != step:
        raise ProtocolError('step mismatch from worker %d: expected %d, got %d'
                            % (channel.neighbor, step, frame_step))
    values = unpack_values(payload)
    if len(values) != channel.recv_length:
        raise ProtocolError('length mismatch from worker %d: %d values, expected %d'
                            % (channel.neighbor, len(values), channel.recv_length))
    return BoundaryMessage(step=frame_step, values=values)


def exchange(channels, outgoing, step, timeout=DEFAULT_TIMEOUT):
    """Sends one message to and receives one message from every neighbour."""
    if not channels:
        return {}
    for j, channel in channels.items():
        message = outgoing.get(j)
        if message is None:
            raise ProtocolError('step %d: nothing to send to worker %d' % (step, j))
        if message.step != step:
            raise ProtocolError('step %d: message for worker %d is tagged step %d'
                                % (step, j, message.step))
        if len(message.values) != channel.send_length:
            raise ProtocolError('step %d: message for worker %d has %d values, expected %d'
                                % (step, j, len(message.values), channel.send_length))

    def send(channel):
        channel.endpoint.send_frame(pack_values(
            step, channel.local, channel.neighbor, outgoing[channel.neighbor].values))

    pool, futures = _concurrently(channels, send)
    try:
        incoming = {j: _receive(channels[j], step, timeout) for j in sorted(channels)}
        for future in futures:
            future.result()
    except BaseException:
        _abort(channels, pool)
        raise
    pool.shutdown()
    return incoming
