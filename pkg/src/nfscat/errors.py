"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation requested exactly on a kernel singularity."""


class ConstraintError(DomainError):
    """A structural constraint between parameters is violated."""


class MeshMismatchError(DomainError):
    """Two objects do not share the same boundary mesh / geometry."""


class AliasingError(DomainError):
    """Expansion degree exceeds what the quadrature mesh can resolve."""


class SolverError(RuntimeError):
    """A linear solve failed or did not meet its residual target."""


class NonConvergenceError(SolverError):
    """Iterative solve diverged or stalled.

    Carries the diff history so callers can report a contraction estimate.
    """

    def __init__(self, message, history=None, contraction=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.contraction = contraction


class RejectedInteriorError(ValueError):
    """Interior field failed its PDE residual gate.

    ``residual_map`` holds the pointwise relative residual for diagnosis.
    """

    def __init__(self, message, residual_map=None):
        super().__init__(message)
        self.residual_map = residual_map
