import socket
import time

from ..errors import ProtocolError
from ..logger import getLogger
from ..wire import HELLO_STEP, HEADER, pack_frame, payload_size, unpack_header
from .base import Endpoint, Transport


RETRY_INTERVAL = 0.05


def _recv_exact(sock, size, neighbor):
    chunks = []
    received = 0
    while received < size:
        try:
            chunk = sock.recv(size - received)
        except socket.timeout as err:
            raise ProtocolError('timed out waiting for worker %s' % neighbor) from err
        except OSError as err:
            raise ProtocolError('connection to worker %s failed: %s' % (neighbor, err)) from err
        if not chunk:
            raise ProtocolError('truncated frame from worker %s: got %d of %d bytes'
                                % (neighbor, received, size))
        chunks.append(chunk)
        received += len(chunk)
    return b''.join(chunks)


def read_frame(sock, neighbor):
    header = _recv_exact(sock, HEADER.size, neighbor)
    step, _, _, length = unpack_header(header)
    return header + _recv_exact(sock, payload_size(step, length), neighbor)


class SocketEndpoint(Endpoint):

    def __init__(self, neighbor, sock):
        super().__init__(neighbor)
        self.sock = sock
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def send_frame(self, data):
        try:
            self.sock.sendall(data)
        except OSError as err:
            raise ProtocolError('cannot send to worker %d: %s' % (self.neighbor, err)) from err

    def recv_frame(self, timeout):
        self.sock.settimeout(timeout)
        return read_frame(self.sock, self.neighbor)

    def close(self):
        self.sock.close()


class TcpTransport(Transport):
    """Workers on any hosts, one rendezvous listener each.

    ``roster`` maps worker index to (host, port). The lower index of every
    neighbouring pair dials the higher one and introduces itself with a
    hello frame.
    """
    name = 'tcp'

    def __init__(self, roster):
        self.roster = {int(i): (host, int(port)) for i, (host, port) in roster.items()}
        self.endpoints = {}

    def _dial(self, index, neighbor, deadline):
        address = self.roster[neighbor]
        while True:
            try:
                sock = socket.create_connection(address, timeout=max(0.1, deadline - time.monotonic()))
                sock.sendall(pack_frame(HELLO_STEP, index, neighbor))
                return sock
            except OSError as err:
                if time.monotonic() >= deadline:
                    raise ProtocolError('worker %d unreachable at %s:%d: %s'
                                        % (neighbor, address[0], address[1], err)) from err
                time.sleep(RETRY_INTERVAL)

    def connect(self, index, neighbors, timeout):
        log = getLogger(__name__)
        missing = [j for j in [index, *neighbors] if j not in self.roster]
        if missing:
            raise ProtocolError('roster has no address for worker(s) %s' % missing)
        deadline = time.monotonic() + timeout

        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            server.bind(self.roster[index])
        except OSError as err:
            server.close()
            raise ProtocolError('worker %d cannot listen on %s:%d: %s'
                                % ((index,) + self.roster[index] + (err,))) from err
        server.listen(len(neighbors) + 1)

        try:
            for neighbor in sorted(j for j in neighbors if j > index):
                self.endpoints[neighbor] = SocketEndpoint(
                    neighbor, self._dial(index, neighbor, deadline))

            expected = {j for j in neighbors if j < index}
            while expected - set(self.endpoints):
                server.settimeout(max(0.0, deadline - time.monotonic()))
                try:
                    conn, _ = server.accept()
                except socket.timeout as err:
                    waiting = sorted(expected - set(self.endpoints))
                    raise ProtocolError('timed out waiting for worker(s) %s to connect'
                                        % waiting) from err
                conn.settimeout(max(0.1, deadline - time.monotonic()))
                step, sender, receiver, _ = unpack_header(read_frame(conn, '?'))
                if step != HELLO_STEP or receiver != index:
                    conn.close()
                    raise ProtocolError('unexpected greeting from %s' % sender)
                if sender in self.endpoints:
                    conn.close()
                    raise ProtocolError('duplicate worker index %d' % sender)
                if sender not in expected:
                    conn.close()
                    raise ProtocolError('worker %d is not a neighbour of worker %d'
                                        % (sender, index))
                self.endpoints[sender] = SocketEndpoint(sender, conn)
        except ProtocolError:
            self.close()
            raise
        finally:
            server.close()

        log.info('Connected to neighbours', extra={'neighbors': sorted(self.endpoints)})
        return dict(self.endpoints)

    def close(self):
        for endpoint in self.endpoints.values():
            endpoint.close()
        self.endpoints = {}
