class AnnealRbmError(Exception):
    """Base class for domain failures raised by annealrbm."""


class EnumerationBudgetError(AnnealRbmError, ValueError):
    def __init__(self, n_units: int, budget: int):
        self.n_units = n_units
        self.budget = budget
        super().__init__(
            f"Exact enumeration refused: {n_units} units exceeds the budget of {budget} units"
        )


class EmbeddingError(AnnealRbmError, ValueError):
    pass


class EstimationError(AnnealRbmError, RuntimeError):
    pass
