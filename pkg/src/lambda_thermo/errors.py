"""Exception types raised across the package."""


class DomainError(ValueError):
    """A parameter or point lies outside the domain of an operation."""


class InadmissibleWordError(ValueError):
    """A symbol sequence violates the Markov transition rule e_{k+1} >= e_k - 1."""


class NoConformalMeasureError(ValueError):
    """No (t, p)-conformal measure exists for the requested shift p."""


class NoInvariantMeasureError(ValueError):
    """No invariant probability absolutely continuous w.r.t. the reference measure."""


class NonConvergenceError(RuntimeError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
