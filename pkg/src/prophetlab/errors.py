"""Exception types shared across the package."""


class ProphetLabError(Exception):
    """Base class for every error raised by prophetlab."""


class DomainError(ProphetLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(ProphetLabError, ValueError):
    """The instance is too large for an exhaustive computation."""


class NumericError(ProphetLabError, ArithmeticError):
    """A numerical solver failed to converge."""


class ProtocolError(ProphetLabError, RuntimeError):
    """An online protocol was driven out of order."""


class PreconditionError(ProphetLabError, ValueError):
    """A verifier's precondition does not hold for the given input."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
