"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised when caller-supplied data violates a documented precondition."""


class UnsupportedKernelError(InputError):
    """Raised when an operation needs a finite-rank kernel but got an
    infinite-rank one (or an unknown family)."""


class NumericalError(RuntimeError):
    """Raised when a linear solve fails beyond the built-in fallbacks.

    Carries a condition-number estimate of the offending matrix in
    ``cond_estimate`` so callers can report it.
    """

    def __init__(self, message: str, cond_estimate: float | None = None):
        if cond_estimate is not None:
            message = f"{message} (condition estimate {cond_estimate:.3e})"
        super().__init__(message)
        self.cond_estimate = cond_estimate
