"""Frame layout shared by the transports and the exchange protocol.

Every frame is a fixed little-endian header followed by a payload::

    step      uint64
    sender    uint32
    receiver  uint32
    length    uint32   # float64 count for data frames, byte count otherwise

Data frames carry ``length`` little-endian float64 values. Two reserved step
numbers mark control frames whose payload is raw bytes.
"""
import struct

import numpy as np

from .errors import ProtocolError


HEADER = struct.Struct('<QIII')
VALUE = np.dtype('<f8')

HANDSHAKE_STEP = 2 ** 64 - 1
HELLO_STEP = 2 ** 64 - 2
CONTROL_STEPS = (HANDSHAKE_STEP, HELLO_STEP)


def payload_size(step, length):
    if step in CONTROL_STEPS:
        return length
    return length * VALUE.itemsize


def pack_frame(step, sender, receiver, payload=b''):
    length = len(payload) if step in CONTROL_STEPS else len(payload) // VALUE.itemsize
    return HEADER.pack(step, sender, receiver, length) + payload


def pack_values(step, sender, receiver, values):
    payload = np.ascontiguousarray(values, dtype=VALUE).tobytes()
    return HEADER.pack(step, sender, receiver, len(values)) + payload


def unpack_header(data):
    if len(data) < HEADER.size:
        raise ProtocolError('truncated frame: %d bytes, header needs %d'
                            % (len(data), HEADER.size))
    return HEADER.unpack_from(data)


def unpack_frame(data):
    """(step, sender, receiver, payload) of a complete frame."""
    step, sender, receiver, length = unpack_header(data)
    payload = data[HEADER.size:]
    expected = payload_size(step, length)
    if len(payload) != expected:
        raise ProtocolError('truncated frame from worker %d: %d payload bytes, header '
                            'announces %d' % (sender, len(payload), expected))
    return step, sender, receiver, payload


def unpack_values(payload):
    return np.frombuffer(payload, dtype=VALUE).astype(np.float64)
