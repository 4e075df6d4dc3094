"""Exception types raised by the library."""


class DomainError(ValueError):
    """Input outside the region where an operation is defined."""


class ConstructionError(RuntimeError):
    """An explicit construction (inversion, coverage, integration) failed."""


class GeometryError(RuntimeError):
    """Degenerate geometry met during energy evaluation."""
