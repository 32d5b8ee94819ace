"""Exception hierarchy shared by all optdesign modules."""


class OptDesignError(Exception):
    """Base class for every error raised by optdesign."""


class DimensionMismatch(OptDesignError, ValueError):
    pass


class LengthNotTriangular(OptDesignError, ValueError):
    pass


class FunctionUndefined(OptDesignError, ValueError):
    """A scalar function was evaluated outside its domain."""


class DomainViolation(FunctionUndefined):
    pass


class EigenFailure(OptDesignError, ArithmeticError):
    pass


class NotPositiveDefinite(OptDesignError, ArithmeticError):
    pass


class SingularInformationMatrix(OptDesignError, ArithmeticError):
    pass


class NegativeCurvature(OptDesignError, ArithmeticError):
    """A criterion Hessian came out indefinite beyond rounding level."""


class InvalidCriterion(OptDesignError, ValueError):
    pass


class DegenerateDesign(OptDesignError, ValueError):
    pass


class ZeroAtom(OptDesignError, ValueError):
    pass


class NotOnSimplex(OptDesignError, ValueError):
    pass


class NotInterior(OptDesignError, ValueError):
    pass


class CapacitanceSingular(OptDesignError, ArithmeticError):
    pass


class LineSearchStalled(OptDesignError, RuntimeError):
    pass


class MaxInnerExceeded(OptDesignError, RuntimeError):
    pass


class DegenerateScores(OptDesignError, ArithmeticError):
    pass


class ParseError(OptDesignError, ValueError):
    pass


class RankDeficientAfterRetries(OptDesignError, RuntimeError):
    pass


class ConfigError(OptDesignError, ValueError):
    pass
