"""Exception hierarchy shared across the package.

The CLI maps ``ValidationError`` subclasses to exit status 1 and
``NumericalError`` to exit status 2.
"""


class MedlitError(Exception):
    """Base class for all package errors."""


class ValidationError(MedlitError, ValueError):
    """Input data or configuration violates a documented contract."""


class ParseError(ValidationError):
    """A file could not be parsed.

    Parameters
    ----------
    message : str
        Human readable description.
    line : int, optional
        1-based line (or row) number where the problem was found.
    path : str, optional
        File the problem was found in.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class EncodingError(ParseError):
    """File is not clean UTF-8 (e.g. a byte-order mark followed by bytes in another encoding)."""


class ConfigError(ValidationError):
    pass


class MissingUpstreamError(ValidationError):
    """A pipeline stage was requested before the stage it depends on produced output."""

    def __init__(self, stage, missing):
        self.stage = stage
        self.missing = missing
        super().__init__(
            f"stage '{stage}' requires output of stage '{missing}', which has not been run"
        )


class NumericalError(MedlitError, ArithmeticError):
    """NaN/Inf or divergence during training."""
