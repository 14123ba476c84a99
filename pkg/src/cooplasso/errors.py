"""Exception types shared across the package.

Input/validation problems derive from :class:`InputError`; numerical
failures derive from :class:`NumericalError`.  The CLI maps the former to
exit code 2 and the latter to exit code 3.
"""


class CoopLassoError(Exception):
    pass


class InputError(CoopLassoError, ValueError):
    pass


class NumericalError(CoopLassoError, RuntimeError):
    pass


# -- group structure ---------------------------------------------------------

class OverlappingGroups(InputError):
    pass


class UncoveredIndex(InputError):
    pass


class EmptyGroup(InputError):
    pass


class NonPositiveWeight(InputError):
    pass


# -- penalties / shapes ------------------------------------------------------

class DimensionMismatch(InputError):
    pass


# -- loss / data preparation -------------------------------------------------

class NonBinaryResponse(InputError):
    pass


class NonFiniteLoss(NumericalError):
    pass


# -- solver ------------------------------------------------------------------

class LineSearchFailure(NumericalError):
    pass


class MaxIterationsExceeded(NumericalError):
    """Raised only on request; fit() normally records the condition in the result."""


# -- model selection ---------------------------------------------------------

class OlsUnavailable(InputError):
    pass


class SigmaRequired(InputError):
    pass


class FoldTooSmall(InputError):
    pass


# -- diagnostics -------------------------------------------------------------

class SingularSupportBlock(InputError):
    """The covariance restricted to the support cannot be inverted; the
    population spec violates the invertibility precondition."""


# -- encoding ----------------------------------------------------------------

class UnknownLevel(InputError):
    pass
