"""Exception taxonomy shared across the toolkit.

Exit-code mapping used by the CLI: usage problems are 1, data problems
(schema/parse/domain) are 2, anything else is 3.
"""


class TriageError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(TriageError):
    """Column/feature layout does not match what a model or loader expects."""


class ParseError(TriageError):
    """A cell or file could not be parsed; message carries the location."""


class DomainError(TriageError):
    """Inputs are structurally valid but outside an operation's domain."""


class DegenerateInputError(DomainError):
    """Inputs collapse to a case the algorithm cannot work with (e.g. all
    surrogate training points identical)."""


class ConvergenceError(TriageError):
    """An iterative fit ran out of iterations; message carries diagnostics."""


class ArtifactError(TriageError):
    """Model artifact is unreadable, truncated, or of an unknown version."""
