"""Exception types shared across the package."""


class GreedyLDPError(Exception):
    """Base class for all package errors."""


class InvalidInput(GreedyLDPError, ValueError):
    """Rejected model input (bad degree sequence, distribution, parameter range)."""


class ContractViolation(GreedyLDPError, RuntimeError):
    """An operation was called outside its precondition."""


class HamiltonianDomainError(GreedyLDPError, ValueError):
    """The per-half-edge generating factor inside the log is not positive."""


class NumericalFailure(GreedyLDPError, RuntimeError):
    """An iterative solver did not converge."""


class SingularityError(GreedyLDPError, RuntimeError):
    """An ODE right-hand side became singular during integration."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class LeftStateSpace(SingularityError):
    """A Hamilton trajectory left the admissible state space."""


class Infeasible(GreedyLDPError):
    """No candidate satisfies the requested constraint (rate is +inf)."""


class OutOfRange(Infeasible, ValueError):
    """A requested target lies outside what the search bounds can reach."""
