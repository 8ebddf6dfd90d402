"""Exception hierarchy shared by every module in the package.

All failures raised deliberately by this package derive from
:class:`NirRecError`, so callers can catch one type at the boundary.  The
command-line layer maps subtrees of this hierarchy onto process exit codes.
"""


class NirRecError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(NirRecError):
    """Operands have incompatible shapes.

    The message names both shapes so the failing call site can be
    reconstructed from the error text alone.
    """


class DomainError(NirRecError):
    """A value lies outside the mathematical domain of an operation."""


class NonFiniteError(DomainError):
    """A NaN or infinity appeared where a finite number is required."""


class ConfigurationError(NirRecError):
    """A config value is missing, malformed, or out of its allowed range."""


class IngestionError(NirRecError):
    """Input data could not be parsed or violates a dataset invariant."""


class UnknownItemError(NirRecError):
    """An item id has no row in the table being indexed."""


class TrainingError(NirRecError):
    """Training could not proceed (divergence, empty split, bad state)."""


class EvaluationError(NirRecError):
    """Evaluation could not proceed or its protocol was violated."""
