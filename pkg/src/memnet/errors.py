"""Exception hierarchy shared across the package.

Validation problems (bad inputs, malformed files, inconsistent model
specifications) raise subclasses of :class:`ValidationError`; numerical
problems encountered mid-computation raise subclasses of
:class:`NumericalError`. The CLI maps the two families to distinct exit
codes.
"""


class MemnetError(Exception):
    """Base class for all package errors."""


class ValidationError(MemnetError):
    """Invalid inputs, options or files."""


class NumericalError(MemnetError):
    """A computation failed for numerical reasons."""


# -- validation ---------------------------------------------------------

class DimensionMismatch(ValidationError):
    pass


class MissingDistances(ValidationError):
    pass


class MissingCoordinates(ValidationError):
    pass


class DuplicateCoordinates(ValidationError):
    pass


class NonPositiveVariance(ValidationError):
    pass


class UnknownPreset(ValidationError):
    pass


class UnknownTable(ValidationError):
    pass


class MalformedCSV(ValidationError):
    pass


class LeadingGap(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class InfeasibleInit(ValidationError):
    pass


# -- numerics -----------------------------------------------------------

class NotStationary(NumericalError):
    pass


class NearDefective(NumericalError):
    """Eigenvector matrix of the AR companion is too ill-conditioned."""


class NotPositiveDefinite(NumericalError):
    """Raised by the Durbin-Levinson recursion; ``step`` is the failing order."""

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class NoConvergence(NumericalError):
    """An iterative method hit its iteration cap; carries the iteration count."""

    def __init__(self, msg, iterations=None):
        super().__init__(msg)
        self.iterations = iterations


class SingularDesign(NumericalError):
    pass


class AllCandidatesFailed(NumericalError):
    pass


class SplineNonMonotone(UserWarning):
    """Spline knots were not monotone; the exact determinant path was used."""
