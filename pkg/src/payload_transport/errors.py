"""Exception hierarchy.

Every error carries a short machine-readable ``category`` string that the
CLI reports alongside its exit code.
"""


class TransportError(Exception):
    category = "error"


class DomainError(TransportError, ValueError):
    """Argument outside the domain of an operation."""

    category = "domain"


class GridParseError(TransportError, ValueError):
    category = "parse"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(TransportError, ValueError):
    category = "config"


class InfeasibleThrustError(TransportError):
    """A rotor would need a negative squared angular speed."""

    category = "infeasible-thrust"

    def __init__(self, rotor, squared):
        self.rotor = rotor
        self.squared = tuple(squared)
        super().__init__(
            f"rotor {rotor} requires s^2 = {self.squared[rotor - 1]:.6g} < 0"
        )


class SingularityError(TransportError):
    """Flat transformation or decoupling matrix is singular at this state."""

    category = "singularity"


class NoPathError(TransportError):
    category = "no-path"


class NoFeasibleTimeError(TransportError):
    category = "no-feasible-time"


class NumericalBlowupError(TransportError):
    category = "numerical-blowup"
