"""Exception hierarchy shared by every rpeakkit module."""


class RPeakKitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(RPeakKitError, ValueError):
    pass


class UnsupportedFormat(ParseError):
    pass


class RangeError(RPeakKitError, ValueError):
    pass


class ConfigError(RPeakKitError, ValueError):
    pass


class InputError(RPeakKitError, ValueError):
    pass


class ShapeError(RPeakKitError, ValueError):
    pass


class UsageError(RPeakKitError, RuntimeError):
    pass


class NumericsError(RPeakKitError, ArithmeticError):
    """Raised on non-finite losses or gradients.

    ``last_good`` optionally carries a parameter snapshot taken before the
    failure so callers can recover.
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good
