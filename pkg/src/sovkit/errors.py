"""Exception taxonomy. The CLI maps these classes onto distinct exit codes."""


class SchemaError(ValueError):
    """Malformed input document (CLI exit code 2)."""


class NonGenericError(RuntimeError):
    """Degenerate curve or instance outside the generic stratum (exit code 3)."""


class NumericDomainError(RuntimeError):
    """Domain guard tripped: tau too degenerate, singular path, stiff flow (exit code 4)."""


class ConvergenceError(RuntimeError):
    """An iteration failed to converge; ``best`` carries the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConsistencyError(RuntimeError):
    """An internal cross-check failed (e.g. expansion remainder, missed zeros)."""


class MatchingError(RuntimeError):
    """Point matching across finite-difference stencils was ambiguous."""
