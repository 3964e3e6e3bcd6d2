"""Exception types shared across the library."""


class RoboSymError(Exception):
    """Base class for all library errors."""


class DimMismatch(RoboSymError):
    """Vector or matrix dimensions do not match the expected shape."""


class GroupMismatch(RoboSymError):
    """Operands belong to different groups (or no group at all)."""


class ClosureExceeded(RoboSymError):
    """Generator closure produced more elements than the configured cap."""


class CapExceeded(RoboSymError):
    """Problem size exceeds the configured cap for a verification-only path."""


class NonIntegralRank(RoboSymError):
    """Group-averaged trace is not an integer; input is not a representation."""


class DegenerateBasis(RoboSymError):
    """Equivariant basis has no free coefficients (all orbits zero-forced)."""


class IncompatibleWidth(RoboSymError):
    """Layer width is not a multiple of the regular-representation block."""


class SchemaError(RoboSymError):
    """Measurement schema is inconsistent with the group/isometry context."""


class ParseError(RoboSymError):
    """Input file is syntactically or structurally invalid."""


class TreeCycle(RoboSymError):
    """Joint graph is not a tree rooted at the base."""


class BadInertia(RoboSymError):
    """Body inertia is not symmetric positive semidefinite."""
