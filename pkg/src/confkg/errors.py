"""Exception hierarchy shared by all confkg modules."""


class ConfKGError(Exception):
    """Base class for every error raised by confkg."""


class DomainError(ConfKGError, ValueError):
    """A quantity left its admissible domain (e.g. a non-positive scale factor)."""


class ShapeError(ConfKGError, ValueError):
    """Grids or sampled arrays are incompatible."""


class UsageError(ConfKGError, ValueError):
    """An operation was called with inconsistent arguments (chart, frame, slice)."""


class UnstableInitialDataError(ConfKGError, ValueError):
    """The asymptotic frequency squared is not positive."""


class StiffnessError(ConfKGError, RuntimeError):
    """The adaptive integrator could not make progress."""


class MatchingError(ConfKGError, ValueError):
    """The mass profile is not static where asymptotic data is required."""


class SpectrumError(ConfKGError, RuntimeError):
    """A single mode of a spectrum failed; ``k`` identifies it."""

    def __init__(self, k, cause):
        super().__init__(f"mode k={k!r} failed: {cause}")
        self.k = k
        self.cause = cause
