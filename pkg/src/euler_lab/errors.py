"""Exception types shared across the laboratory.

Plain ``ValueError`` is used for ordinary bad arguments; the classes below
mark failure modes that callers are expected to branch on (pipeline exit
codes, hypothesis violations, solver breakdown).
"""


class EulerLabError(Exception):
    """Base class for domain-specific failures."""


class EmptySupportError(EulerLabError):
    """The velocity field has no nodes above the support threshold."""


class AmbiguousOuterBoundaryError(EulerLabError):
    """Two boundary components enclose maximal area within tie tolerance."""


class LevelNotAttainedError(EulerLabError):
    """A requested level set is empty on the domain."""


class InteriorCriticalPointError(EulerLabError):
    """The stream function has a critical point away from the boundary."""


class UnsupportedTopologyError(EulerLabError):
    """The domain mask does not have the component structure an operation needs."""


class InconsistentFieldError(EulerLabError):
    """Field data contradicts a structural assumption (e.g. non-constant boundary trace)."""


class VanishingFieldOnCurveError(EulerLabError):
    """A vector field vanishes at a sample point of a curve where it must not."""


class UndersampledCurveError(EulerLabError):
    """Angle increments along a curve are too coarse for a trustworthy winding number."""


class SelfIntersectionError(EulerLabError):
    """A polyline that must be simple intersects itself."""


class SingularNodeError(EulerLabError):
    """A node with zero boundary distance entered a singular-potential assembly."""


class ConvergenceFailureError(EulerLabError):
    """An iterative solve stagnated before reaching its residual target."""


class StagnationPointError(EulerLabError):
    """The velocity vanishes inside the retracted domain (hypothesis (A1)/(C1) violated)."""


class HypothesisViolationError(EulerLabError):
    """A checkable hypothesis of the analysis fails; carries a location when known."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class DomainEvaluationError(EulerLabError):
    """A closed-form field was evaluated outside its domain of validity."""


class ProfileFailureError(EulerLabError):
    """No valid inner radius for a comparison profile (indicates an implementation bug)."""
