"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: config errors -> 2, numeric /
convergence errors -> 3, invariant violations -> 4.
"""


class InputError(ValueError):
    """Malformed or out-of-domain input to an operation."""


class ConfigError(ValueError):
    """Invalid run configuration (schema violation or gate failure)."""


class ConvergenceError(RuntimeError):
    """An iterative solve exhausted its budget; carries the residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InvariantViolation(RuntimeError):
    """A mathematical invariant the scheme guarantees failed numerically."""
