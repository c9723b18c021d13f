"""Exception hierarchy shared across the package."""


class EqDiscoverError(Exception):
    """Base class for all package errors."""


# --- expression core ---

class ExpressionSyntaxError(EqDiscoverError):
    """Source string cannot be tokenized or parsed (unbalanced parens, bad token)."""


class LibraryViolationError(EqDiscoverError):
    """Parsed expression violates its symbol library.

    Carries the full list of :class:`~eqdiscover.expressions.Violation`
    records so callers can log individual reasons.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


# --- numerics ---

class GridTooSmallError(EqDiscoverError):
    """Not enough points along an axis for the requested derivative stencil."""


class SingularSystemError(EqDiscoverError):
    """Normal equations are numerically singular and no regularization was given."""


class AllCoefficientsEliminatedError(EqDiscoverError):
    """STRidge thresholding removed every column."""


class NoFiniteStartError(EqDiscoverError):
    """Every restart of the constant fit had a non-finite loss at its start point."""


# --- datasets ---

class UnstableIntegrationError(EqDiscoverError):
    """PDE generation blew up (solution norm exceeded the stability guard)."""


class FormatError(EqDiscoverError):
    """On-disk dataset file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# --- llm gateway ---

class TransportError(EqDiscoverError):
    """Live backend failed after exhausting retries."""

    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class ReplayMissError(EqDiscoverError):
    """No recorded exchange matches the prompt hash."""


class ScriptExhaustedError(EqDiscoverError):
    """Mock backend ran out of scripted responses."""


# --- search ---

class TooFewParentsError(EqDiscoverError):
    """Evolution requires at least two parents."""
