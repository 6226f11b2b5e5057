"""Exception types shared across the library."""


class TerrainSeekError(Exception):
    """Base class for all library-specific errors."""


class InvalidParam(TerrainSeekError, ValueError):
    """An operation parameter violates its precondition."""


class InvalidSpec(TerrainSeekError, ValueError):
    """A strategy specification violates its invariants."""


class OutOfDomain(TerrainSeekError, ValueError):
    """A coordinate lies outside a segment's closed-form domain."""


class BudgetExceeded(TerrainSeekError, RuntimeError):
    """The search exhausted its arc-length budget before stopping."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NeverCrosses(TerrainSeekError, ValueError):
    """A path never crosses the given ray within its extent."""


class Unreachable(TerrainSeekError, RuntimeError):
    """No node of the discretized free-space graph sees the target."""


class ZeroOptimal(TerrainSeekError, ValueError):
    """The optimal distance is degenerate (at or below tolerance)."""


class DegenerateFlat(TerrainSeekError, ValueError):
    """The 2.5D terrain is flat; the grid strategy requires lambda > 0."""


class DisconnectedInput(TerrainSeekError, ValueError):
    """A cell set that must be 4-connected is not."""
