EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_PROTOCOL = 3
EXIT_INTERNAL = 4


class OtmdError(Exception):
    exit_code = 1

    def __init__(self, message=''):
        super().__init__(message)
        self.message = message


class ScenarioError(OtmdError):
    """Invalid scenario file: syntax, dangling ids or broken invariants."""
    exit_code = EXIT_SCENARIO


class ConfigurationError(ScenarioError):
    """Data is well-formed but cannot drive a run (routing, splits, flags)."""


class PartitionError(ScenarioError):
    pass


class ProtocolError(OtmdError):
    """Neighbour exchange failed: mismatch, desync, truncation or timeout."""
    exit_code = EXIT_PROTOCOL


class InternalError(OtmdError):
    exit_code = EXIT_INTERNAL


ERRORS_BY_NAME = {
    cls.__name__: cls
    for cls in (OtmdError, ScenarioError, ConfigurationError,
                PartitionError, ProtocolError, InternalError)
}


def rebuild_error(name, message):
    """Recreate an error reported by a worker process under its own class."""
    cls = ERRORS_BY_NAME.get(name, InternalError)
    return cls(message)
