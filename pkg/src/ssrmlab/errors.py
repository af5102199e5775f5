"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class CapabilityError(RuntimeError):
    """The request is valid but outside what this implementation supports."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""


class ConfigError(ParameterError):
    """A config file is malformed; carries the offending key in the message."""
