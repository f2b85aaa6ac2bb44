"""Exception types shared across the package."""


class RydbellError(Exception):
    """Base class for all package errors."""


class InvalidStateError(RydbellError):
    """A state vector or density operator violates its invariants."""


class InvalidChannelError(RydbellError):
    """A Kraus set is not trace preserving within tolerance."""


class ConfigurationError(RydbellError):
    """A protocol sequence or experiment configuration is inconsistent."""


class FitError(RydbellError):
    """An estimator could not produce a meaningful fit."""
