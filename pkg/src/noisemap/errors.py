"""Exception types shared across the package.

Argument problems raise plain ``ValueError`` (and ``IndexError`` for
out-of-range indices). The classes here cover the failure modes the
command-line tool maps to distinct exit codes.
"""


class ConfigError(ValueError):
    """Invalid run or method configuration; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DataError(Exception):
    """Missing or malformed data in a container."""


class ManifestError(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NumericalError(ArithmeticError):
    """A numerical procedure produced non-finite values."""


class TrainingError(NumericalError):
    def __init__(self, message, last_finite_epoch=None):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch


class DescentError(NumericalError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
