"""Exception types; each maps to a CLI exit status."""


class AnnctlError(Exception):
    exit_code = 1


class ConfigError(AnnctlError, ValueError):
    """Invalid configuration value; ``path`` names the offending field."""

    exit_code = 2

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class DivergenceError(AnnctlError, ArithmeticError):
    """A simulation or training run produced non-finite numbers."""

    exit_code = 3


class InsufficientDataError(AnnctlError, ValueError):
    exit_code = 3


class OutputError(AnnctlError, OSError):
    """A file could not be read or written."""

    exit_code = 4
