"""Exception hierarchy shared across the package."""


class OrdlearnError(Exception):
    """Base class for package-specific errors."""


class ValidationError(OrdlearnError):
    """Bad inputs, bad configuration, or malformed files (CLI exit code 1)."""


class TrainingDivergedError(OrdlearnError):
    """Non-finite loss or weights encountered during training."""


class ProbeContextError(OrdlearnError):
    """A probe word has no qualifying context window in the corpus."""
