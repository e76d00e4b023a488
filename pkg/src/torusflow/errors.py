"""Exception types shared across the engine."""


class TorusflowError(Exception):
    """Base class for all engine errors."""


class ScaleMismatch(TorusflowError):
    """A norm or certificate was requested beyond the scale a field carries."""


class DomainEscape(TorusflowError):
    """A norm bound certifies that an argument leaves the controlled strip."""


class TruncationBudgetExceeded(TorusflowError):
    """The discarded spectral tail of an operation exceeds the budget."""


class NonContraction(TorusflowError):
    """Observed iteration ratios contradict the contraction certificate."""


class OutOfRange(TorusflowError):
    """An inversion target violates the distance precondition."""


class ContractionStall(TorusflowError):
    """A fixed-point residual stopped decreasing before reaching tolerance."""


class NoPositiveRadius(TorusflowError):
    """No radius on the search grid satisfies the inverse-chart bound."""


class InvertibilityLost(TorusflowError):
    """A composed map no longer carries a valid invertibility certificate."""


class EmptyLevel(TorusflowError):
    """A nested-ball level has an empty sampling intersection."""


class AdmissibilityViolation(TorusflowError):
    """A field fails the smallness certificates of the local solver."""

