"""Exception types raised by the dlgp package."""


class DlgpError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(DlgpError):
    """Cholesky factorization failed even after the maximum diagonal jitter."""


class ModelEmpty(DlgpError):
    """Prediction was requested from a tree holding no training data."""


class DegenerateDivision(DlgpError):
    """Repeated divisions could not produce a leaf with free capacity."""


class DegenerateTargets(DlgpError):
    """A normalized metric was requested for targets with zero variance."""


class ParseError(DlgpError):
    """A data file could not be parsed.

    ``row`` and ``column`` are 1-based file positions.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ConfigError(DlgpError):
    """An experiment configuration failed validation; ``field`` names the culprit."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
