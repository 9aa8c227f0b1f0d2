"""Exception types raised by the library."""


class TopocritError(Exception):
    """Base class for all numerical rejections."""


class SizeError(TopocritError, ValueError):
    pass


class CriticalPointError(TopocritError):
    """The requested quantity is undefined because a gap closes."""


class TrivialPhaseError(TopocritError):
    """No in-gap (edge) states exist."""


class NotHermitianError(TopocritError, ValueError):
    pass


class TrackingError(TopocritError):
    """Eigenstate or branch tracking became ambiguous."""


class AccuracyError(TopocritError):
    """A numerical budget (step count, finite-difference cross-check) was not met."""


class NotCriticalError(TopocritError, ValueError):
    """A routine that needs a gap closing was handed gapped couplings."""
