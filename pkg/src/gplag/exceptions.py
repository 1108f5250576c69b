"""Exception hierarchy shared by all gplag modules."""


class GPlagError(Exception):
    """Base class for every error raised by this package."""


class FormatError(GPlagError):
    """Malformed input file (bad or missing header)."""


class ParseError(GPlagError):
    """A field could not be parsed; carries the 1-based file row."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class ValidationError(GPlagError, ValueError):
    """Input violates a data or parameter invariant."""


class NumericalError(GPlagError, ArithmeticError):
    """Factorization failure or non-finite objective."""


class OptimizationError(GPlagError):
    """Every start of a likelihood optimization failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class SamplerError(GPlagError):
    """MCMC sampler could not reach a usable acceptance rate."""
