"""Exception types shared across the simulator.

The CLI maps these onto its exit-code contract: configuration problems
exit 1, trace ingestion problems exit 2, structurally infeasible instances
exit 3.
"""


class ConfigError(ValueError):
    """Invalid experiment or CLI configuration."""


class TraceError(ValueError):
    """Request-trace ingestion failure (I/O or format)."""


class EmptyTraceError(TraceError):
    """The input contained no usable request events."""


class TraceFormatError(TraceError):
    """Too many malformed lines to trust the input format."""


class InfeasibleInstanceError(ValueError):
    """Instance violates a structural precondition."""


class OracleSizeError(InfeasibleInstanceError):
    """Exhaustive enumeration would exceed the combinatorial guard."""
