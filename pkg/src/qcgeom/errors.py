"""Exception types raised across the toolkit."""


class QCGeomError(Exception):
    """Base class for all toolkit errors."""


class ZeroDivisor(QCGeomError, ZeroDivisionError):
    """Division by a quaternion or jet whose value is (numerically) zero."""


class UsageError(QCGeomError, ValueError):
    """An operation was called outside its supported parameter range."""


class DomainError(QCGeomError, ValueError):
    """An argument lies outside the domain of the formula."""


class DegenerateStructureError(QCGeomError):
    """A linear system or Gram-Schmidt step is too ill-conditioned to trust."""


class ModelAssumptionError(QCGeomError):
    """The model violates an assumption needed by the connection construction."""


class SingularityError(QCGeomError):
    """A transform was evaluated at (or too close to) its excluded point."""


class FitError(QCGeomError):
    """A conformality fit could not reach an acceptable residual."""
