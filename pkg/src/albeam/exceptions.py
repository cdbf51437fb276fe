"""Exception types shared across the package."""


class AlbeamError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AlbeamError):
    """Mismatched or invalid probe / grid / algorithm configuration."""


class OutOfWindowError(AlbeamError):
    """A scatterer lies beyond the simulated receive window."""


class ContractViolationError(AlbeamError):
    """An input violates a documented precondition (e.g. negative envelope)."""


class UnboundedFwhmError(AlbeamError):
    """A profile never falls below half maximum inside the image."""


class IntegrityError(AlbeamError):
    """A serialized file failed magic, checksum or digest validation."""


class SequencingError(AlbeamError):
    """A session operation arrived in the wrong round state."""


class BadRoundError(AlbeamError):
    """A selection referenced an unknown or stale round."""


class UnknownCandidateError(AlbeamError):
    """A selection referenced a candidate id not in the shown set."""


class TrainingAbortedError(AlbeamError):
    """A training step produced a non-finite loss and was rolled back."""
