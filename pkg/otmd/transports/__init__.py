from ..errors import ConfigurationError
from .base import Endpoint, Transport


class TransportName:
    LOCAL = 'local'
    TCP = 'tcp'


class TransportManager:

    def __init__(self):
        self.transport_map = {
            TransportName.LOCAL: self.get_transport_local,
            TransportName.TCP: self.get_transport_tcp,
        }

    def get_transport(self, name, **options):
        func = self.transport_map.get((name or '').lower())
        if func is None:
            raise ConfigurationError("unknown transport '%s', expected one of %s"
                                     % (name, sorted(self.transport_map)))
        return func(**options)

    def get_transport_local(self, pipes=None, **options):
        from .local import LocalTransport
        return LocalTransport(pipes or {})

    def get_transport_tcp(self, roster=None, **options):
        from .tcp import TcpTransport
        return TcpTransport(roster or {})


transport_manager = TransportManager()


def get_transport(name, **options):
    return transport_manager.get_transport(name, **options)


__all__ = [
    'Endpoint',
    'Transport',
    'TransportName',
    'get_transport',
]
