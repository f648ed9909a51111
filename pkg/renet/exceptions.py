"""Errors raised by the simulator library.

Library code raises these and never exits; the management commands map them
to ``CommandError`` exit codes.
"""


class RenetError(Exception):
    """Base class of every simulator error."""


class TraceError(RenetError, ValueError):
    """Invalid trace, workload specification or trace file."""


class EntropyError(RenetError, ValueError):
    pass


class TreeError(RenetError):
    pass


class DuplicateKeyError(TreeError):
    pass


class KeyAbsentError(TreeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NetworkError(RenetError, ValueError):
    """Invalid network parameters or an unroutable request."""


class InvariantViolation(RenetError):
    """A network invariant no longer holds; carries the list of violations."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class HelperUnavailable(InvariantViolation):
    pass


class SparsityViolation(RenetError):
    pass


class StaticDanError(RenetError):
    pass


class LedgerError(RenetError, ValueError):
    pass


class ConfigError(RenetError, ValueError):
    pass


class SnapshotError(RenetError, ValueError):
    pass
