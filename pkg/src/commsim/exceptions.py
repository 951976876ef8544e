class CommsimError(ValueError):
    """Base class for all validation errors raised by commsim."""


class DomainError(CommsimError):
    """A numeric parameter lies outside the domain of the operation."""


class ConfigurationError(CommsimError):
    """A scheme or experiment configuration cannot be realized."""


class ProtocolViolation(CommsimError):
    """A message is inconsistent with the plan it was supposedly produced under."""
