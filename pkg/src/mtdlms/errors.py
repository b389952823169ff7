"""Exception types raised across the package."""


class ScenarioError(ValueError):
    """A network, constraint set or ground truth violates a modeling invariant."""

    def __init__(self, message, constraint=None):
        if constraint is not None:
            message = f"constraint {constraint}: {message}"
        super().__init__(message)
        self.constraint = constraint


class RankDeficientError(ScenarioError):
    """A constraint matrix that must have full row rank does not."""

    def __init__(self, rank, rows, constraint=None):
        super().__init__(
            f"matrix is rank deficient (numerical rank {rank} < {rows} rows)",
            constraint=constraint,
        )
        self.rank = rank
        self.rows = rows


class UnsupportedConfiguration(ValueError):
    """The requested computation does not cover this scenario."""


class UnstableModelError(ArithmeticError):
    """A recursion matrix has spectral radius >= 1 where a limit is required."""


class DivergenceError(RuntimeError):
    """An adaptive run produced estimates beyond the divergence guard."""

    def __init__(self, iteration, norm):
        super().__init__(f"estimates diverged at iteration {iteration} (|w| = {norm:.3g})")
        self.iteration = iteration
        self.norm = norm
