"""Exception types shared across the toolkit."""


class HeatsenseError(Exception):
    """Base class for all toolkit-specific errors."""


class DegenerateStencilError(HeatsenseError):
    """Local weight system is singular (degenerate stencil geometry)."""

    def __init__(self, center: int, message: str | None = None):
        self.center = center
        super().__init__(message or f"degenerate stencil at point {center}")


class IllPosedModelError(HeatsenseError):
    """The assembled discrete model cannot be solved (singular operator)."""


class RankDeficientError(HeatsenseError):
    """A least-squares system does not have full column rank."""

    def __init__(self, rank: int, ncols: int):
        self.rank = rank
        self.ncols = ncols
        super().__init__(f"rank-deficient system: numerical rank {rank} < {ncols} columns")


class DegeneratePlacementError(HeatsenseError):
    """Sensor placement yields a rank-deficient measurement map."""


class SelectionFailedError(HeatsenseError):
    """A greedy selector could not find any admissible candidate."""


class DivergenceError(HeatsenseError):
    """Training diverged (non-finite loss)."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite training loss at step {step}")


class ConfigError(HeatsenseError):
    """Invalid experiment configuration or config file."""


class ExperimentCellError(HeatsenseError):
    """A benchmark grid cell failed; partial results were flushed."""

    def __init__(self, method: str, k: int, sigma: float, cause: Exception):
        self.method = method
        self.k = k
        self.sigma = sigma
        super().__init__(f"grid cell method={method} k={k} sigma={sigma} failed: {cause}")
