from typing import Optional


class LevelSetError(RuntimeError):
    """Numerical failure while estimating a level-set quantity."""


class LevelNotBracketedError(LevelSetError):
    pass


class EmptyLevelSetError(LevelSetError):
    pass


class DegenerateGradientError(LevelSetError):
    """Gradient norm below the floor where geometry needs a normal."""

    def __init__(self, message: str, count: int = 1) -> None:
        super().__init__(message)
        self.count = count


class NoBracketError(LevelSetError):
    """No sign change of F along the gradient line within the search radius."""


class FocalPointError(LevelSetError):
    pass


class EmptyRegionError(LevelSetError):
    """Band or tube contains no grid cell."""


class TopologyError(LevelSetError):
    pass


class IntegrandEvaluationError(LevelSetError):
    def __init__(self, message: str, cell_index: Optional[int] = None) -> None:
        if cell_index is not None:
            message = f"{message} (cell {cell_index})"
        super().__init__(message)
        self.cell_index = cell_index


class DegenerateVarianceError(LevelSetError):
    pass


class DegenerateBandwidthError(LevelSetError):
    pass


class ReplicateFailureError(LevelSetError):
    pass


class MalformedExpressionError(ValueError):
    pass
