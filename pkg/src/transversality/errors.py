"""Exception and warning types shared across the package."""


class TransversalityError(Exception):
    """Base class for structured errors raised by this package."""


class DimensionMismatchError(TransversalityError, ValueError):
    def __init__(self, expected, got, what="vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")


class UnsupportedSetError(TransversalityError):
    """The requested operation is not available for this combination of variants."""


class NotInSetError(TransversalityError, ValueError):
    def __init__(self, point, gap):
        self.point = point
        self.gap = gap
        super().__init__(f"point {list(point)} is at distance {gap:.3e} from the set")


class SetFormatError(TransversalityError, ValueError):
    """Malformed set, scene or manifest description."""


class PreconditionError(TransversalityError, ValueError):
    """Input violates a documented precondition."""


class InfeasibleToleranceError(TransversalityError, ValueError):
    """No admissible tolerance exists for the requested parameters."""


class IntersectionDistanceError(TransversalityError):
    def __init__(self, method, detail):
        self.method = method
        super().__init__(f"intersection distance via {method} failed: {detail}")


class MissingSequenceError(TransversalityError):
    """A cone pair has no recorded generating sequence."""


class SamplingWarning(UserWarning):
    """Fewer samples than requested could be produced."""
