"""The canonical 16-trait canopy parameter model.

Every stage of the pipeline — sampling, forward simulation, inversion,
trait rasters — shares one fixed parameter ordering, given by
:data:`PARAMETER_NAMES`.  A parameter vector is a float64 array of length
16 in that order; :class:`ParameterVector` is a typed convenience view.

Leaf structure/biochemistry come first (plate count, pigments, water, dry
matter), then canopy structure (leaf area index, leaf angle distribution,
hot spot), then the soil selector and the acquisition geometry in degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from .errors import ParameterError, ShapeError

__all__ = [
    "PARAMETER_NAMES",
    "N_PARAMETERS",
    "ParameterVector",
    "ParameterRanges",
    "default_ranges",
]

PARAMETER_NAMES: tuple[str, ...] = (
    "n_struct",
    "cab",
    "car",
    "cant",
    "cbrown",
    "cw",
    "cm",
    "lai",
    "lidfa",
    "lidfb",
    "type_lidf",
    "hspot",
    "soil_index",
    "theta_s",
    "theta_v",
    "phi_rel",
)

N_PARAMETERS = len(PARAMETER_NAMES)

# Default sampling bounds per parameter; soil_index bounds depend on the
# soil library in use and are injected by default_ranges().
_DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "n_struct": (1.0, 2.5),
    "cab": (0.0, 160.0),
    "car": (0.0, 60.0),
    "cant": (0.0, 5.0),
    "cbrown": (0.0, 1.0),
    "cw": (0.0, 0.07),
    "cm": (0.0, 0.1),
    "lai": (0.0, 10.0),
    "lidfa": (30.0, 70.0),
    "lidfb": (0.0, 0.0),
    "type_lidf": (1.0, 1.0),
    "hspot": (0.01, 0.5),
    "soil_index": (0.0, 0.0),
    "theta_s": (15.0, 80.0),
    "theta_v": (0.0, 35.0),
    "phi_rel": (100.0, 150.0),
}


@dataclass(frozen=True)
class ParameterVector:
    """One canopy realization, one float per canonical parameter."""

    n_struct: float
    cab: float
    car: float
    cant: float
    cbrown: float
    cw: float
    cm: float
    lai: float
    lidfa: float
    lidfb: float
    type_lidf: float
    hspot: float
    soil_index: float
    theta_s: float
    theta_v: float
    phi_rel: float

    def to_array(self) -> NDArray[np.float64]:
        return np.array([getattr(self, n) for n in PARAMETER_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values: NDArray[np.floating] | Iterable[float]) -> "ParameterVector":
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (N_PARAMETERS,):
            raise ShapeError(
                f"parameter vector must have shape ({N_PARAMETERS},), got {arr.shape}"
            )
        return cls(*(float(v) for v in arr))

    def replace(self, **updates: float) -> "ParameterVector":
        unknown = set(updates) - set(PARAMETER_NAMES)
        if unknown:
            raise ParameterError(f"unknown parameters: {sorted(unknown)}")
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(updates)
        return ParameterVector(**current)


class ParameterRanges:
    """Per-parameter closed sampling bounds ``[minimum, maximum]``.

    A parameter whose minimum equals its maximum is *degenerate*: sampling
    always produces that constant value.  Bounds with minimum > maximum are
    rejected.
    """

    def __init__(self, minima: Iterable[float], maxima: Iterable[float]):
        lo = np.asarray(tuple(minima), dtype=np.float64)
        hi = np.asarray(tuple(maxima), dtype=np.float64)
        if lo.shape != (N_PARAMETERS,) or hi.shape != (N_PARAMETERS,):
            raise ShapeError(
                f"ranges need {N_PARAMETERS} minima and maxima, "
                f"got {lo.shape} and {hi.shape}"
            )
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ParameterError("range bounds must be finite")
        bad = lo > hi
        if bad.any():
            names = [PARAMETER_NAMES[i] for i in np.flatnonzero(bad)]
            raise ParameterError(f"minimum exceeds maximum for: {', '.join(names)}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self._lo = lo
        self._hi = hi

    @property
    def minima(self) -> NDArray[np.float64]:
        return self._lo

    @property
    def maxima(self) -> NDArray[np.float64]:
        return self._hi

    @property
    def spans(self) -> NDArray[np.float64]:
        return self._hi - self._lo

    def degenerate_mask(self) -> NDArray[np.bool_]:
        return self._lo == self._hi

    def bounds(self, name: str) -> tuple[float, float]:
        i = self.index(name)
        return float(self._lo[i]), float(self._hi[i])

    @staticmethod
    def index(name: str) -> int:
        try:
            return PARAMETER_NAMES.index(name)
        except ValueError:
            raise ParameterError(f"unknown parameter {name!r}") from None

    def replace(self, name: str, minimum: float, maximum: float) -> "ParameterRanges":
        i = self.index(name)
        lo = self._lo.copy()
        hi = self._hi.copy()
        lo[i], hi[i] = minimum, maximum
        return ParameterRanges(lo, hi)

    def violations(
        self, values: NDArray[np.floating], tolerance: float = 0.0
    ) -> NDArray[np.bool_]:
        """Elementwise out-of-bounds mask for (..., 16) parameter arrays.

        ``tolerance`` widens each bound by that fraction of the parameter
        span (with an absolute floor for degenerate spans), which absorbs
        float32 round-tripping of otherwise valid values.
        """
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape[-1] != N_PARAMETERS:
            raise ShapeError(f"last axis must have {N_PARAMETERS} entries, got {arr.shape}")
        slack = tolerance * np.maximum(self.spans, 1.0)
        return (arr < self._lo - slack) | (arr > self._hi + slack)

    def contains(self, values: NDArray[np.floating], tolerance: float = 0.0) -> bool:
        return not bool(self.violations(values, tolerance).any())

    def clip(self, values: NDArray[np.floating]) -> NDArray[np.float64]:
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape[-1] != N_PARAMETERS:
            raise ShapeError(f"last axis must have {N_PARAMETERS} entries, got {arr.shape}")
        return np.clip(arr, self._lo, self._hi)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParameterRanges):
            return NotImplemented
        return bool(np.array_equal(self._lo, other._lo) and np.array_equal(self._hi, other._hi))

    def __repr__(self) -> str:
        pairs = ", ".join(
            f"{n}=[{lo:g}, {hi:g}]" for n, lo, hi in zip(PARAMETER_NAMES, self._lo, self._hi)
        )
        return f"ParameterRanges({pairs})"


def default_ranges(soil_min: float = 0.0, soil_max: float = 0.0) -> ParameterRanges:
    """Standard retrieval bounds for all 16 parameters.

    The soil selector bounds default to the single-spectrum case; pass the
    library's index range (e.g. ``0, n_soils - 1``) to sample over it.
    """
    bounds = dict(_DEFAULT_BOUNDS)
    bounds["soil_index"] = (float(soil_min), float(soil_max))
    lo = [bounds[n][0] for n in PARAMETER_NAMES]
    hi = [bounds[n][1] for n in PARAMETER_NAMES]
    return ParameterRanges(lo, hi)
