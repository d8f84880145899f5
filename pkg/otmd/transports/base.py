class Endpoint:
    """Ordered, reliable frame channel to one neighbour."""

    def __init__(self, neighbor):
        self.neighbor = neighbor

    def send_frame(self, data):
        raise NotImplementedError

    def recv_frame(self, timeout):
        """Returns one complete frame or raises ProtocolError."""
        raise NotImplementedError

    def close(self):
        pass


class Transport:
    name = ''

    def connect(self, index, neighbors, timeout):
        """Opens one endpoint per neighbour: {neighbor: Endpoint}."""
        raise NotImplementedError

    def close(self):
        pass
