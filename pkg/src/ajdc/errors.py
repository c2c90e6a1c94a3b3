"""Exception types shared across the toolkit."""
from contextlib import contextmanager


class AJDCError(Exception):
    """Base class for toolkit errors."""


class ValidationError(AJDCError, ValueError):
    """An input violates a precondition (shape, range, configuration)."""


class NumericalError(AJDCError, ArithmeticError):
    """A numerical failure: rank deficiency, singular update, non-convergence."""


class DegenerateWarning(UserWarning):
    """The solution exists but is not unique (e.g. repeated eigenvalues)."""


@contextmanager
def stage(name: str):
    """Tag toolkit errors raised inside the block with the pipeline stage."""
    try:
        yield
    except AJDCError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
            exc.args = (f"[{name}] {exc}",) + exc.args[1:]
        raise
