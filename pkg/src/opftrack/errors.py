"""Exception types raised across the package."""


class OpfError(Exception):
    """Base class for all package errors."""


class InvalidInputError(OpfError, ValueError):
    """Input value is malformed (non-finite, wrong shape, non-unit axis, ...)."""


class InvalidConfigError(OpfError, ValueError):
    """A configuration value violates its documented constraints."""


class InsufficientHistoryError(OpfError):
    """Not enough trajectory entries for the requested window computation."""


class NumericalSingularityError(OpfError, ArithmeticError):
    """A covariance matrix that must be positive definite is singular."""


class DegenerateUpdateError(OpfError, ArithmeticError):
    """Every particle likelihood underflowed to zero."""


class NoCandidateError(OpfError):
    """Occluder selection was requested with no other object in the scene."""


class ScenarioError(InvalidConfigError):
    """A scenario document failed to parse or validate.

    ``where`` names the offending field path (``objects[1].waypoints[0].t``)
    or a ``line N`` marker for JSON syntax errors.
    """

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
