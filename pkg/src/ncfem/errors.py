"""Exception types raised across the package."""


class ContractViolation(ValueError):
    """An argument violates a documented precondition."""


class NumericalDegeneracyError(ArithmeticError):
    """A rank or null-space computation did not produce the expected dimension."""


class UnisolvenceError(NumericalDegeneracyError):
    """A Vandermonde matrix is singular at the audit tolerance."""


class ComplexStructureError(ArithmeticError):
    """A differential operator does not map a source space into its target."""


class SingularityError(ArithmeticError):
    """A dense matrix is singular to working precision."""


class IterationLimitError(RuntimeError):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
