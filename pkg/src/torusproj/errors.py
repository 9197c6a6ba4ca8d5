"""Exception types shared across the package."""


class LatticeError(ValueError):
    """Invalid lattice basis or lattice configuration."""


class ResourceLimitError(RuntimeError):
    """A computation would exceed a configured resource cap."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class CoverError(RuntimeError):
    """A direction set or cap cover violates one of its invariants."""


class DecompositionError(RuntimeError):
    """The Whitney organization of direction pairs is inconsistent."""


class ConvergenceWarning(UserWarning):
    """A grid quadrature failed its N-doubling convergence check."""
