"""Exception types shared across the package."""


class DictiError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(DictiError):
    """An argument breaks a documented precondition (shape, range, type)."""


class InsufficientSamples(DictiError):
    """Too few samples for the requested estimator."""


class BackendError(DictiError):
    """The synthesis backend is unavailable or failed mid-request."""


class NoSubjectError(DictiError):
    """The label map contains no body pixels, so there is nothing to edit."""


class IngestionError(DictiError):
    """A dataset root does not match the expected layout."""


class EmptyDatasetError(IngestionError):
    """The dataset layout is present but contains no images."""
