"""Exception hierarchy shared across the package."""


class ReinsGameError(Exception):
    """Base class for all package errors."""


class Divergent(ReinsGameError):
    """An integral or moment fails to converge."""


class NonFinite(ReinsGameError):
    """An integrand or residual returned NaN or infinity."""


class NoBracket(ReinsGameError):
    """Root bracket endpoints have the same sign."""


class MaxIterations(ReinsGameError):
    """Iterative solver exhausted its iteration budget."""


class SingularJacobian(ReinsGameError):
    """Newton step failed because the Jacobian is singular."""


class OutOfDomain(ReinsGameError):
    """Argument outside the mathematical domain of the operation."""


class NoSolution(ReinsGameError):
    """The defining equation has no root on the admissible set."""


class ControlOutOfDomain(ReinsGameError):
    """Contract control outside the admissible control set."""


class NonIntegrable(ReinsGameError):
    """The reinsurer's distorted compensator has infinite total mass."""


class ConstraintViolated(ReinsGameError):
    """A closed-form oracle's parameter constraint does not hold."""


class ParseError(ReinsGameError):
    """Malformed market configuration file."""


class ValidationError(ReinsGameError):
    """Well-formed configuration violating a model constraint."""


class SolverFailure(ReinsGameError):
    """Equilibrium solve failed; diagnostics attached when available."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
