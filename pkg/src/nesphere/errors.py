"""Exception taxonomy shared by all nesphere modules."""


class NesphereError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(NesphereError):
    """An input file does not conform to its documented format."""


class UsageError(NesphereError):
    """An operation was called with arguments violating its preconditions."""


class DegenerateDataError(NesphereError):
    """Input data is structurally unusable (zero variance, rank-deficient, ...)."""


class TrainingError(NesphereError):
    """Iterative training failed (non-finite loss or parameters)."""
