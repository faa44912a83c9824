"""Exception types raised by the laboratory."""


class BVTransportError(Exception):
    """Base class, so callers can catch everything the package raises."""


class ConfigurationError(BVTransportError, ValueError):
    """Inconsistent domain, grid, or run parameters."""


class ScheduleError(BVTransportError, ValueError):
    """A requested slab straddles a breakpoint of a scheduled field."""


class ResolutionError(BVTransportError, ValueError):
    """A requested plane or box does not align with the grid in use."""


class CFLError(BVTransportError, RuntimeError):
    """The explicit update would violate its stability constraint."""
