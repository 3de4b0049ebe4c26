"""Exception hierarchy shared by every stage of the pipeline.

The CLI maps these onto exit codes (see :data:`EXIT_CODES`).
"""


class DstqError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ParseError(DstqError):
    def __init__(self, message, line=None):
        self.line = line
        self.reason = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedLine(ParseError):
    pass


class VertexOutOfRange(ParseError):
    pass


class RootIsTerminal(ParseError):
    pass


class NegativeCost(ParseError):
    pass


class SelfLoop(ParseError):
    pass


class InfeasibleError(DstqError):
    """No feasible solution exists (unreachable terminal, useless root, ...)."""

    exit_code = 2


class ValidationError(DstqError):
    pass


class StructureError(ValidationError):
    """A node set is not a root-containing connected subtree."""


class CapExceeded(DstqError):
    """A configured size cap was hit. Never silently truncated."""

    exit_code = 3

    def __init__(self, message, reached=None):
        self.reached = reached
        super().__init__(message)


class RetryCapExhausted(DstqError):
    exit_code = 4

    def __init__(self, message, uncovered=()):
        self.uncovered = tuple(uncovered)
        super().__init__(message)


class EmbeddingError(DstqError):
    pass


class RoundBudgetExhausted(DstqError):
    """A lifted solution was asked for more conditioning than its level allows."""


class LpError(DstqError):
    pass


class LpInfeasible(LpError, InfeasibleError):
    exit_code = 2


class LpUnbounded(LpError):
    pass


class StageError(DstqError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"[{stage}] {cause}")


class RoundingError(DstqError):
    """A lifted solution broke a precondition or invariant of the rounding."""
