"""Exception types raised across the package."""


class PinballError(Exception):
    """Base class for all package errors."""


class CuspPoint(PinballError):
    """The requested boundary parameter sits on a corner of the table."""


class CuspHit(PinballError):
    """A trajectory ran into the cardioid cusp, where the map is undefined."""


class TangentHit(PinballError):
    """A trajectory arrived tangentially; the reflection is ill conditioned."""


class NotPeriodic(PinballError):
    """The supplied points do not close up into a periodic orbit."""


class NoConvergence(PinballError):
    """An iterative search ran out of iterations."""


class Unsupported(PinballError):
    """The requested quantity has no closed form for this table."""
