"""Exception types shared across the package."""


class XstabError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(XstabError, ValueError):
    """Array or architecture dimensions do not line up."""


class DomainError(XstabError, ValueError):
    """A value is outside the domain an operation accepts."""


class SchemaError(XstabError, ValueError):
    """A file or config is missing a required column or field."""


class CsvParseError(XstabError, ValueError):
    """A CSV cell could not be parsed; message names the row and column."""


class InfeasibleError(XstabError, ValueError):
    """No feasible matching exists under the requested constraints."""


class UnsupportedError(XstabError, ValueError):
    """The operation is defined only for a restricted architecture."""


class DegenerateError(XstabError, ValueError):
    """Inputs are degenerate (e.g. identical models where a direction is needed)."""


class DivergenceError(XstabError, RuntimeError):
    """Training produced a non-finite loss or parameter update."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(XstabError, ValueError):
    """An experiment config file is invalid."""
