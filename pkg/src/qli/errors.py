"""Exception and warning types raised across the package."""


class QLIError(Exception):
    """Base class for all package errors."""


class InvalidChannelError(QLIError, ValueError):
    pass


class DomainError(QLIError, ValueError):
    pass


class InvalidPlanError(QLIError, ValueError):
    pass


class ModelBreakdownError(QLIError, ValueError):
    """A linearised noise or yield model has left its range of validity."""


class UndefinedBoundError(QLIError, ValueError):
    pass


class CalibrationError(QLIError, RuntimeError):
    pass


class ConfigError(QLIError, ValueError):
    pass


class ModelWarning(UserWarning):
    """Result is usable but a modelling assumption is being stretched."""
