"""Exception taxonomy for the hsforge pipeline.

Every error raised by this package derives from :class:`HsforgeError` so
callers can catch pipeline failures with a single except clause.  Most
classes also inherit the matching builtin (``ValueError``, ``OSError``) so
code written against plain Python conventions keeps working.
"""

from __future__ import annotations


class HsforgeError(Exception):
    """Base class for all errors raised by hsforge."""


class GridError(HsforgeError, ValueError):
    """A wavelength grid is malformed (bad bounds, step, or alignment)."""


class BandCoverageError(HsforgeError, ValueError):
    """A sensor band covers no sample of the working wavelength grid."""


class ParameterError(HsforgeError, ValueError):
    """A canopy parameter vector is out of range or structurally invalid."""


class GeometryError(HsforgeError, ValueError):
    """A viewing/illumination geometry is outside the supported domain."""


class ConsistencyError(HsforgeError, ArithmeticError):
    """An internal physical invariant was violated (e.g. reflectance > 1).

    This signals a bug or corrupted input table, never a user mistake, and
    is deliberately loud: the pipeline must not write silently wrong data.
    """


class ConfigError(HsforgeError, ValueError):
    """A configuration value or file is invalid."""


class DomainError(HsforgeError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ShapeError(HsforgeError, ValueError):
    """An array argument has the wrong shape or axis layout."""


class ConstraintInfeasibleError(HsforgeError, RuntimeError):
    """Plausibility filters rejected too many samples to fill the table."""

    def __init__(self, message: str, acceptance_rate: float | None = None):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate


class TableFormatError(HsforgeError, ValueError):
    """A serialized table file (binary lookup table or CSV) is truncated,
    corrupt, or mislabeled."""


class RasterFormatError(HsforgeError, ValueError):
    """A raster header/payload pair is missing, inconsistent, or corrupt."""
