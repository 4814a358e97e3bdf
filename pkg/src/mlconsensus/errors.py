"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: InputError -> 2, SolverError -> 3,
MismatchError -> 4.
"""


class InputError(ValueError):
    """Malformed or inconsistent input (files, matrices, configs)."""


class SolverError(RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class MismatchError(ValueError):
    """Two structures that must cover the same node set do not."""
