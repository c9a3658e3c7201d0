"""Exception types shared across the navigation stack."""


class LambdaNavError(Exception):
    """Base class for all package errors."""


class OutOfGrid(LambdaNavError, IndexError):
    """A point, cell or segment falls outside the grid extent."""


class UnobservedCell(LambdaNavError, LookupError):
    """An operation needed the elevation of a cell that has no points."""


class NonPositiveRadius(LambdaNavError, ValueError):
    """Wheel radius must be strictly positive."""


class InvalidSteering(LambdaNavError, ValueError):
    """Steering angle magnitude reached pi/2."""


class EmptyReference(LambdaNavError, ValueError):
    """The reference trajectory has no samples."""


class ConfigError(LambdaNavError, ValueError):
    """Scenario parameters are inconsistent."""


class ParseError(ConfigError):
    """The configuration file is not valid TOML."""


class ValidationError(ConfigError):
    """A configuration field has an invalid value or is unknown."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)
