"""Exception types raised across the package."""


class SignalDesignError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SignalDesignError, ValueError):
    pass


class SingularCovariance(SignalDesignError, ArithmeticError):
    pass


class ZeroRank(SignalDesignError, ValueError):
    pass


class ToleranceUnreachable(SignalDesignError, RuntimeError):
    """Raised when a cdf estimate cannot reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class Disconnected(SignalDesignError, ValueError):
    pass


class UnknownRoute(SignalDesignError, KeyError):
    pass


class NoConvergence(SignalDesignError, RuntimeError):
    """Raised when an iterative procedure hits its iteration cap.

    The best iterate found so far is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoStableScale(SignalDesignError, RuntimeError):
    pass


class InvalidParams(SignalDesignError, ValueError):
    pass


class TooShort(SignalDesignError, ValueError):
    pass


class InfeasibleTopology(SignalDesignError, ValueError):
    pass


class GameFileError(SignalDesignError, ValueError):
    """Malformed game/belief file. ``lineno`` is 1-based when known."""

    def __init__(self, message, path=None, lineno=None):
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        else:
            where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno
