from ..errors import ProtocolError
from .base import Endpoint, Transport


class PipeEndpoint(Endpoint):

    def __init__(self, neighbor, connection):
        super().__init__(neighbor)
        self.connection = connection

    def send_frame(self, data):
        try:
            self.connection.send_bytes(data)
        except (OSError, ValueError) as err:
            raise ProtocolError('cannot send to worker %d: %s' % (self.neighbor, err)) from err

    def recv_frame(self, timeout):
        try:
            if not self.connection.poll(timeout):
                raise ProtocolError('timed out after %gs waiting for worker %d'
                                    % (timeout, self.neighbor))
            return self.connection.recv_bytes()
        except (EOFError, OSError) as err:
            raise ProtocolError('worker %d closed the channel' % self.neighbor) from err

    def close(self):
        self.connection.close()


class LocalTransport(Transport):
    """Worker processes on one host joined by multiprocessing pipes.

    ``pipes`` maps each neighbour to this worker's end of their pipe.
    """
    name = 'local'

    def __init__(self, pipes):
        self.pipes = dict(pipes)
        self.endpoints = {}

    def connect(self, index, neighbors, timeout):
        missing = [j for j in neighbors if j not in self.pipes]
        if missing:
            raise ProtocolError('worker %d has no pipe to worker(s) %s' % (index, missing))
        self.endpoints = {j: PipeEndpoint(j, self.pipes[j]) for j in sorted(neighbors)}
        return dict(self.endpoints)

    def close(self):
        for endpoint in self.endpoints.values():
            endpoint.close()
