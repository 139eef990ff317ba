"""Shared exception types."""


class GridcraftError(Exception):
    """Base class for all package errors."""


class ContractError(GridcraftError, ValueError):
    """Caller violated an operation precondition or passed a malformed payload."""


class NotAliveError(ContractError):
    """Operation requires a living agent."""


class GenerationError(GridcraftError):
    """World generation could not satisfy the resource guarantees."""


class SchemaParseError(GridcraftError, ValueError):
    """Structured response document failed validation."""


class IntentError(GridcraftError, ValueError):
    """Response declares an action whose payload fields contradict it."""


class GraphFormatError(GridcraftError, ValueError):
    """Persisted knowledge graph violates a structural invariant."""


class BackendError(GridcraftError):
    """Planner backend failed to produce a valid response."""


class IntegrityError(GridcraftError):
    """Episode record failed replay verification."""


class VersionMismatchError(IntegrityError):
    """Episode record was written by an incompatible format version."""
