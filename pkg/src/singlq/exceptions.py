"""Exception hierarchy for singlq."""


class SinglqError(Exception):
    """Base class for all errors raised by this package."""


class NotSymmetric(SinglqError, ValueError):
    pass


class NotPositiveDefinite(SinglqError, ValueError):
    pass


class NotPSD(SinglqError, ValueError):
    pass


class EigenFailure(SinglqError, ArithmeticError):
    pass


class NoStabilizingSolution(SinglqError, ArithmeticError):
    """The Riccati equation has no stabilizing solution (or it was not found)."""


class SingularShift(SinglqError, ArithmeticError):
    """A shifted system ``gamma*I - M`` is (numerically) singular."""


class RankDeficient(SinglqError, ValueError):
    pass


class Overflow(SinglqError, OverflowError):
    pass


class DimensionMismatch(SinglqError, ValueError):
    pass


class SingularTransform(SinglqError, ArithmeticError):
    pass


class StructureViolation(SinglqError, ArithmeticError):
    """Transformed data deviates from the expected block structure."""


class StepUnderflow(SinglqError, ArithmeticError):
    pass


class Divergence(SinglqError, ArithmeticError):
    """Closed-loop state blew up; the feedback law is not admissible."""


class TailNotDecaying(SinglqError, ArithmeticError):
    pass


class ParseError(SinglqError, ValueError):
    """Malformed problem file."""
