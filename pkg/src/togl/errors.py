"""Exception types. The CLI maps each family onto an exit code."""


class ConfigError(ValueError):
    """Bad experiment configuration (exit code 2)."""


class DataError(ValueError):
    """Unreadable or malformed input data (exit code 3)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(ArithmeticError):
    """A linear-algebra step could not be carried out (exit code 4)."""


class RankDeficiencyError(NumericalError):
    pass
