"""Exception hierarchy for the pricing engine."""


class EndowmentHedgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(EndowmentHedgeError, ValueError):
    """A parameter set violates a model invariant."""


class AlphaTooLarge(ConfigurationError):
    pass


class RhoOutOfRange(ConfigurationError):
    pass


class NonPositiveVolatility(ConfigurationError):
    pass


class InitialBelowFloor(ConfigurationError):
    pass


class DegenerateBound(EndowmentHedgeError, ValueError):
    """The limit-gap bound is vacuous for the given parameters."""


class NonPositiveDimension(EndowmentHedgeError, ValueError):
    pass


class ZeroPivot(EndowmentHedgeError, ArithmeticError):
    pass


class NonConvergedGrid(EndowmentHedgeError, ArithmeticError):
    """A solved surface left its a-priori bounds, which signals an unstable grid."""


class OutOfDomain(EndowmentHedgeError, ValueError):
    pass


class DegenerateSensitivity(EndowmentHedgeError, ArithmeticError):
    pass
