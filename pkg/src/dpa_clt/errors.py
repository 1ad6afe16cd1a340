"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so callers that only care
about "bad input" can catch that; capacity and numerical failures derive from
:class:`RuntimeError`.
"""


class ParameterError(ValueError):
    """Invalid model parameters."""


class NonPositiveParameter(ParameterError):
    pass


class AlphaGammaSumNotOne(ParameterError):
    pass


class DegenerateCase(ParameterError):
    """alpha or gamma equal to 0 or 1."""


class CapacityExceeded(RuntimeError):
    """Requested graph size does not fit the memory budget."""


class GridTooSmall(ValueError):
    pass


class StateSpaceExplosion(ValueError):
    """Exact enumeration requested beyond the hard cap."""


class SingularStep(ArithmeticError):
    """A factor (1 - delta/n) vanished in the coefficient recursion."""


class BoxTooSmall(RuntimeError):
    """Truncated summation box leaves too much tail mass."""


class ZeroPredictedVariance(ValueError):
    pass
