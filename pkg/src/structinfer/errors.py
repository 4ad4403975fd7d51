"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class GraphValidationError(ValidationError):
    """A label graph document violates the format invariants."""


class FormatError(ValueError):
    """A binary container is malformed; carries the failing byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class GradientError(RuntimeError):
    """A gradient came back non-finite; names the parameter block."""


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite; carries the iteration number."""

    def __init__(self, iteration: int):
        super().__init__(f"training loss is non-finite at iteration {iteration}")
        self.iteration = iteration
