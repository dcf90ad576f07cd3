"""Exception hierarchy shared by all jtheta modules.

Exit-code contract for the CLI: DomainError/ParseError/PreconditionViolated
map to exit code 2, PrecisionExhausted/NonConvergence to exit code 3.
"""


class ThetaError(Exception):
    """Base class for all jtheta errors."""


class DomainError(ThetaError):
    """Input outside the mathematical domain (e.g. Im(tau) <= 0)."""


class PreconditionViolated(ThetaError):
    """An operation was called outside its stated contract."""


class PrecisionExhausted(ThetaError):
    """The working precision cannot support the requested guarantee."""


class NonConvergence(ThetaError):
    """An iteration exceeded its convergence budget."""


class ParseError(ThetaError, ValueError):
    """Malformed textual input (CLI number parsing)."""
