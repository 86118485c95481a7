"""Exception types shared across modules.

Each error carries an ``exit_code`` used by the command line front end.
"""


class BcpatchError(Exception):
    exit_code = 1
    kind = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class DomainError(BcpatchError, ValueError):
    """Input outside the domain of an operation."""
    exit_code = 3
    kind = "domain"


class FieldError(BcpatchError, ValueError):
    """Array does not describe a valid symmetric field."""
    exit_code = 3
    kind = "field"


class ShapeError(BcpatchError, ValueError):
    exit_code = 3
    kind = "shape"


class SingularityError(BcpatchError, ValueError):
    exit_code = 3
    kind = "singularity"


class ResolutionError(BcpatchError):
    """The grid does not resolve the region a diagnostic needs."""
    exit_code = 3
    kind = "resolution"


class ConvergenceError(BcpatchError):
    """An iteration or bracketing search did not converge."""
    exit_code = 2
    kind = "nonconvergence"


class StabilizationError(ConvergenceError):
    """Iterates left the admissible cone and clamping could not recover."""
    kind = "stabilization"


class FitError(BcpatchError):
    exit_code = 3
    kind = "fit"


class ConstructionError(BcpatchError):
    exit_code = 3
    kind = "construction"


class UsageError(BcpatchError):
    exit_code = 1
    kind = "usage"
