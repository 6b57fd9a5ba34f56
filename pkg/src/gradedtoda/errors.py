"""Exception hierarchy.

Everything raised on purpose by the package derives from ``GradedTodaError``.
Input problems (bad graph specs, mismatched shapes) additionally derive from
``ValueError`` so generic callers can catch them the usual way.
"""


class GradedTodaError(Exception):
    pass


# graph construction / lookup
class GraphSpecError(GradedTodaError, ValueError):
    pass


class NonContiguousWindow(GraphSpecError):
    pass


class EdgeRankViolation(GraphSpecError):
    pass


class Disconnected(GraphSpecError):
    pass


class NonPositiveMeasure(GraphSpecError):
    pass


class UnknownFamily(GraphSpecError):
    pass


class BadParams(GraphSpecError):
    pass


class UnknownVertex(GraphSpecError, KeyError):
    pass


# operators
class DimensionMismatch(GradedTodaError, ValueError):
    pass


class WindowMismatch(GradedTodaError, ValueError):
    pass


class MeasureBalanceViolated(GradedTodaError, ValueError):
    pass


class SeparationViolated(GradedTodaError):
    pass


class NotWeightedSelfAdjoint(GradedTodaError, ValueError):
    pass


class ZeroOffDiagonal(GradedTodaError, ValueError):
    pass


# dynamics
class InverseDomainError(GradedTodaError, ValueError):
    pass


class MassBelowDelta(GradedTodaError, ValueError):
    pass


class NonFiniteField(GradedTodaError, FloatingPointError):
    pass


class BlowUp(GradedTodaError):
    """Integration left the configured bound.

    ``t_last`` is the last sample time at which the state was still finite and
    bounded; ``trajectory`` holds everything recorded up to that point.
    """

    def __init__(self, message, t_last=None, trajectory=None):
        super().__init__(message)
        self.t_last = t_last
        self.trajectory = trajectory


class SingularDeterminant(GradedTodaError, ArithmeticError):
    pass


# lax
class StructureLost(GradedTodaError):
    pass


class TooFewSamples(GradedTodaError, ValueError):
    pass


class TrivialKernel(GradedTodaError, ValueError):
    pass
