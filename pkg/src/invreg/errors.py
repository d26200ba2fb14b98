"""Exception types raised across invreg.

Argument problems also derive from ValueError and numerical failures also
derive from numpy.linalg.LinAlgError, so callers that already catch the
builtin/numpy error keep working.
"""

from numpy.linalg import LinAlgError


class InvregError(Exception):
    """Base class for every error raised by invreg."""


# =============================================================================
# NUMERICAL FAILURES
# =============================================================================


class NotPositiveDefinite(InvregError, LinAlgError):
    """A Cholesky pivot fell at or below the positive-definiteness threshold."""


class NonSymmetric(InvregError, LinAlgError):
    """A matrix declared symmetric is asymmetric beyond round-off."""


class Singular(InvregError, LinAlgError):
    """A system that must be solved exactly is singular."""


class SingularInput(InvregError, LinAlgError):
    """An unpenalized precision fit was asked to invert a singular covariance."""


class NoConvergence(InvregError, RuntimeError):
    """An iterative solver hit its iteration cap before meeting its tolerance."""


class EstimatorUndefined(InvregError, RuntimeError):
    """The estimator has no value on this dataset (e.g. a singular plug-in)."""


# =============================================================================
# ARGUMENT ERRORS
# =============================================================================


class BadRho(InvregError, ValueError):
    """AR(1) correlation outside the open interval (-1, 1)."""


class BadGamma(InvregError, ValueError):
    """Precision penalty outside its admissible range."""


class BadK(InvregError, ValueError):
    """Fold count incompatible with the sample size."""


class RankTooLarge(InvregError, ValueError):
    """Requested rank exceeds min(design cols, response cols)."""


class MissingOracle(InvregError, ValueError):
    """An oracle estimator was requested without ground truth."""


class ShapeMismatch(InvregError, ValueError):
    """Operand shapes do not agree."""


class ParseError(InvregError, ValueError):
    """A config or dataset file could not be parsed."""


class TooFewRows(InvregError, ValueError):
    """A dataset has fewer rows than the workflow needs."""
