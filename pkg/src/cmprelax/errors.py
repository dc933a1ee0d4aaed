class InputError(ValueError):
    """Malformed or non-finite input data."""


class DimensionError(InputError):
    """Shapes that do not fit together."""


class PreconditionError(ValueError):
    """Input is well formed but violates an operation's precondition."""


class NumericalBreakdown(RuntimeError):
    """Solver iterate became non-finite."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
