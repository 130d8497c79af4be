class JunctionFabError(Exception):
    """Base class for all errors raised by junctionfab."""


class GeometryDomainError(JunctionFabError, ValueError):
    """Input outside the physical domain of a formula (e.g. angle >= 90°)."""


class FeatureNotDevelopedError(JunctionFabError):
    """Dose stays below the development threshold along the whole cut."""


class SimulationError(JunctionFabError):
    """Invalid Monte Carlo or wafer simulation request."""


class FitError(JunctionFabError):
    """A least-squares fit could not be performed on the given data."""


class ConfigError(JunctionFabError):
    """Configuration file could not be read or validated."""


class SchemaVersionError(JunctionFabError):
    """CSV file declares a schema major version newer than supported."""


class DatasetError(JunctionFabError):
    """Malformed dataset row.

    ``row`` is the 1-based data row number, ``None`` for file-level
    problems.
    """

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
