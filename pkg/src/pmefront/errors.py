"""Exception types shared across the package."""


class PmeFrontError(Exception):
    """Base class for all package errors."""


class GridMismatchError(PmeFrontError):
    """Two fields or masks do not live on the same grid."""


class NonFiniteFieldError(PmeFrontError):
    """A NaN or infinity showed up where finite values are required."""


class NegativeDensityError(PmeFrontError):
    """A density field has a negative cell."""

    def __init__(self, cell_index, value):
        self.cell_index = tuple(int(k) for k in cell_index)
        self.value = float(value)
        super().__init__(f"negative density {value:.3e} at cell {self.cell_index}")


class UnsupportedRegimeError(PmeFrontError):
    """The coefficient audit does not cover the requested estimate."""


class MarginViolationError(PmeFrontError):
    """The support reached the safety margin at the domain boundary."""


class ScenarioError(PmeFrontError):
    """A scenario file failed validation."""


class EmptyMaskError(PmeFrontError):
    """A set operation received an empty mask where a non-empty one is required."""
