"""Exception types raised by meshkit."""


class MeshkitError(Exception):
    """Base class for all library errors."""


class InvalidArgument(MeshkitError, ValueError):
    pass


class InvalidSpec(MeshkitError, ValueError):
    pass


class GridNameError(MeshkitError, ValueError):
    """Raised when a grid name cannot be parsed.

    ``token`` holds the offending part of the name.
    """

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class UnsupportedGrid(MeshkitError, ValueError):
    pass


class ProjectionDomainError(MeshkitError, ValueError):
    pass


class StateError(MeshkitError, RuntimeError):
    """Operation not allowed in the current host/device state."""


class ContractError(MeshkitError, RuntimeError):
    """Access through a view that violates its contract (stale or read-only)."""


class PlanError(MeshkitError, RuntimeError):
    pass


class ConflictError(MeshkitError, KeyError):
    pass


class NotFoundError(MeshkitError, KeyError):
    pass


class CommAborted(MeshkitError, RuntimeError):
    """Raised on ranks blocked in the simulated communicator after another rank failed."""


class DeadlockError(CommAborted):
    pass
