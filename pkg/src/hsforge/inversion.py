"""Per-pixel lookup-table inversion with ensemble uncertainty.

Each observed band vector is matched against every table entry by
root-mean-square error; the n lowest-cost entries form the pixel's
ensemble, summarized per trait by the median and by configurable low/high
percentiles.  Pixels with any non-finite observation are marked invalid:
all traits take the sentinel value, the cost is +inf.

Inversion output is a pure per-pixel function of (observation, table,
config), so trait maps never depend on worker count or scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, ConsistencyError, DomainError, ParameterError, ShapeError
from .kernels import accumulator_to_cost, topk_search
from .lut import LookupTable
from .parameters import (
    N_PARAMETERS,
    PARAMETER_NAMES,
    ParameterRanges,
    ParameterVector,
    default_ranges,
)
from .rtm import CoefficientTable, RtmConfig, SoilLibrary, forward_batch

__all__ = [
    "INVALID_TRAIT",
    "InversionConfig",
    "PixelResult",
    "TraitMaps",
    "rmse",
    "n_best",
    "percentile",
    "ensemble_stats",
    "invert_pixel",
    "invert_matrix",
    "invert_image",
    "simulate_from_traits",
]

#: Trait value marking an invalid pixel (all real traits are > -9999).
INVALID_TRAIT = -9999.0

#: Range slack (fraction of span) absorbed when traits re-enter through
#: float32 rasters; violations beyond it are real errors.
FLOAT32_RANGE_TOLERANCE = 1e-5


@dataclass(frozen=True)
class InversionConfig:
    """Ensemble size and uncertainty percentiles of the inversion."""

    n_best: int = 10
    low_percentile: float = 0.05
    high_percentile: float = 0.95

    def __post_init__(self) -> None:
        if self.n_best < 1:
            raise ConfigError(f"n_best must be >= 1, got {self.n_best}")
        if not 0.0 <= self.low_percentile < self.high_percentile <= 1.0:
            raise ConfigError(
                "percentiles must satisfy 0 <= low < high <= 1, got "
                f"({self.low_percentile}, {self.high_percentile})"
            )


@dataclass(frozen=True)
class PixelResult:
    """Inversion summary of one pixel."""

    median_params: ParameterVector
    p5_params: NDArray[np.float64]
    p95_params: NDArray[np.float64]
    best_cost: float
    best_index: int

    def __post_init__(self) -> None:
        median = self.median_params.to_array()
        object.__setattr__(self, "p5_params", np.asarray(self.p5_params, dtype=np.float64))
        object.__setattr__(self, "p95_params", np.asarray(self.p95_params, dtype=np.float64))
        if self.p5_params.shape != (N_PARAMETERS,) or self.p95_params.shape != (N_PARAMETERS,):
            raise ShapeError("percentile vectors must have 16 entries")
        if np.any(self.p5_params > median) or np.any(median > self.p95_params):
            raise ConsistencyError("percentile ordering violated: need p5 <= median <= p95")
        if not self.best_cost >= 0:
            raise ConsistencyError(f"best cost must be non-negative, got {self.best_cost}")


@dataclass(frozen=True)
class TraitMaps:
    """Whole-tile inversion output in canonical trait order."""

    median: NDArray[np.float64]
    p5: NDArray[np.float64]
    p95: NDArray[np.float64]
    cost: NDArray[np.float64]
    best_index: NDArray[np.int64]

    def __post_init__(self) -> None:
        shape = self.median.shape
        if len(shape) != 3 or shape[2] != N_PARAMETERS:
            raise ShapeError(f"median must be (rows, cols, {N_PARAMETERS}), got {shape}")
        if self.p5.shape != shape or self.p95.shape != shape:
            raise ShapeError("median, p5, p95 must share one shape")
        if self.cost.shape != shape[:2] or self.best_index.shape != shape[:2]:
            raise ShapeError("cost and best_index must be (rows, cols)")

    @property
    def rows(self) -> int:
        return self.median.shape[0]

    @property
    def cols(self) -> int:
        return self.median.shape[1]

    def valid_mask(self) -> NDArray[np.bool_]:
        return self.median[:, :, 0] != INVALID_TRAIT


def rmse(obs: NDArray[np.floating], sim: NDArray[np.floating]) -> float:
    """Root-mean-square error between two equal-length band vectors."""
    a = np.asarray(obs, dtype=np.float64)
    b = np.asarray(sim, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape or a.size == 0:
        raise ShapeError(f"need two equal-length 1-D vectors, got {a.shape} and {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def percentile(sorted_values: NDArray[np.floating], q: float) -> float:
    """Linear-interpolation order statistic of ascending ``sorted_values``.

    With n values indexed from 0: h = (n-1)q, f = floor(h), and the result
    is ``x[f] + (h - f) * (x[f+1] - x[f])``; q = 0.5 on an even count gives
    the mean of the two central values.
    """
    values = np.asarray(sorted_values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise DomainError("percentile needs a non-empty 1-D value vector")
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")
    h = (values.size - 1) * q
    f = int(h)
    if f >= values.size - 1:
        return float(values[-1])
    return float(values[f] + (h - f) * (values[f + 1] - values[f]))


def _percentile_sorted_block(block: NDArray[np.float64], q: float) -> NDArray[np.float64]:
    """Vectorized percentile over axis 1 of an ascending-sorted block.

    Same arithmetic as :func:`percentile`, applied to (pixels, n, traits).
    """
    n = block.shape[1]
    h = (n - 1) * q
    f = int(h)
    if f >= n - 1:
        return block[:, n - 1, :].copy()
    w = h - f
    lower = block[:, f, :]
    return lower + w * (block[:, f + 1, :] - lower)


def ensemble_stats(
    entries: NDArray[np.floating], cfg: InversionConfig | None = None
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """(median, low, high) per trait over an (n, 16) ensemble.

    Each trait column is sorted independently and summarized by the three
    percentiles of ``cfg``; the outputs always satisfy low <= median <= high
    elementwise because the percentile is monotone in q on sorted data.
    """
    cfg = cfg or InversionConfig()
    if isinstance(entries, (list, tuple)) and entries and isinstance(entries[0], ParameterVector):
        arr = np.stack([e.to_array() for e in entries])
    else:
        arr = np.asarray(entries, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != N_PARAMETERS or arr.shape[0] == 0:
        raise ShapeError(f"expected a non-empty (n, {N_PARAMETERS}) ensemble, got {arr.shape}")
    block = np.sort(arr, axis=0)[None, :, :]
    median = _percentile_sorted_block(block, 0.5)[0]
    low = _percentile_sorted_block(block, cfg.low_percentile)[0]
    high = _percentile_sorted_block(block, cfg.high_percentile)[0]
    return median, low, high


def n_best(
    obs: NDArray[np.floating], lut: LookupTable, n: int, workers: int = 1
) -> list[tuple[int, float]]:
    """The n table entries closest to ``obs``, ascending by (cost, index)."""
    vec = np.asarray(obs, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != len(lut.band_set):
        raise ShapeError(
            f"observation must have {len(lut.band_set)} bands, got shape {vec.shape}"
        )
    idx, acc = topk_search(lut.band_values_f64, vec[None, :], n, workers)
    costs = accumulator_to_cost(acc[0], len(lut.band_set))
    return [(int(i), float(c)) for i, c in zip(idx[0], costs)]


def invert_matrix(
    obs: NDArray[np.float64], lut: LookupTable, cfg: InversionConfig | None = None, workers: int = 1
) -> tuple[
    NDArray[np.float64],
    NDArray[np.float64],
    NDArray[np.float64],
    NDArray[np.float64],
    NDArray[np.int64],
]:
    """Invert a (pixels, bands) matrix of finite observations.

    Returns (median, low, high, cost, best_index); the first three are
    (pixels, 16), cost holds the best entry's RMSE per pixel.
    """
    cfg = cfg or InversionConfig()
    obs = np.ascontiguousarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[1] != len(lut.band_set):
        raise ShapeError(
            f"observations must be (pixels, {len(lut.band_set)}), got {obs.shape}"
        )
    if cfg.n_best > len(lut):
        raise ConfigError(f"n_best {cfg.n_best} exceeds table size {len(lut)}")
    idx, acc = topk_search(lut.band_values_f64, obs, cfg.n_best, workers)
    costs = accumulator_to_cost(acc[:, 0], len(lut.band_set))
    ensembles = np.sort(lut.params[idx], axis=1)
    median = _percentile_sorted_block(ensembles, 0.5)
    low = _percentile_sorted_block(ensembles, cfg.low_percentile)
    high = _percentile_sorted_block(ensembles, cfg.high_percentile)
    return median, low, high, costs, idx[:, 0]


def invert_pixel(
    obs: NDArray[np.floating], lut: LookupTable, cfg: InversionConfig | None = None
) -> PixelResult:
    """Invert one finite band vector into a :class:`PixelResult`."""
    cfg = cfg or InversionConfig()
    vec = np.asarray(obs, dtype=np.float64)
    if vec.ndim != 1:
        raise ShapeError(f"observation must be 1-D, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise DomainError("invert_pixel needs finite observations")
    median, low, high, cost, best = invert_matrix(vec[None, :], lut, cfg)
    return PixelResult(
        median_params=ParameterVector.from_array(median[0]),
        p5_params=low[0],
        p95_params=high[0],
        best_cost=float(cost[0]),
        best_index=int(best[0]),
    )


def invert_image(
    cube: NDArray[np.floating],
    lut: LookupTable,
    cfg: InversionConfig | None = None,
    workers: int = 1,
) -> TraitMaps:
    """Invert a (rows, cols, bands) cube into trait maps.

    Pixels containing any non-finite band are invalid: their traits are
    :data:`INVALID_TRAIT`, their cost +inf, their best index -1.  Output is
    bit-identical for any ``workers`` value.
    """
    cfg = cfg or InversionConfig()
    data = np.asarray(cube)
    if data.ndim != 3:
        raise ShapeError(f"cube must be (rows, cols, bands), got shape {data.shape}")
    if data.shape[2] != len(lut.band_set):
        raise ShapeError(
            f"cube has {data.shape[2]} bands but the table expects {len(lut.band_set)}"
        )
    rows, cols = data.shape[:2]
    valid = np.isfinite(data).all(axis=2)

    median = np.full((rows, cols, N_PARAMETERS), INVALID_TRAIT, dtype=np.float64)
    low = np.full((rows, cols, N_PARAMETERS), INVALID_TRAIT, dtype=np.float64)
    high = np.full((rows, cols, N_PARAMETERS), INVALID_TRAIT, dtype=np.float64)
    cost = np.full((rows, cols), np.inf, dtype=np.float64)
    best = np.full((rows, cols), -1, dtype=np.int64)

    if valid.any():
        obs = data[valid].astype(np.float64)
        med_v, low_v, high_v, cost_v, best_v = invert_matrix(obs, lut, cfg, workers)
        median[valid] = med_v
        low[valid] = low_v
        high[valid] = high_v
        cost[valid] = cost_v
        best[valid] = best_v
    return TraitMaps(median=median, p5=low, p95=high, cost=cost, best_index=best)


def simulate_from_traits(
    traits: TraitMaps | NDArray[np.floating],
    coeffs: CoefficientTable,
    soils: SoilLibrary,
    cfg: RtmConfig | None = None,
    ranges: ParameterRanges | None = None,
) -> NDArray[np.float32]:
    """Forward-simulate a (rows, cols, n_samples) float32 cube from traits.

    ``traits`` is a median trait block (rows, cols, 16) or a
    :class:`TraitMaps`.  Invalid pixels (all 16 entries equal to the
    sentinel) emit all-zero spectra.  Other out-of-range values raise,
    naming the pixel and trait; a slack of ``FLOAT32_RANGE_TOLERANCE`` of
    each span absorbs float32 raster round-trips, and surviving values are
    nudged back inside their bounds before simulation.
    """
    block = traits.median if isinstance(traits, TraitMaps) else np.asarray(traits, dtype=np.float64)
    if block.ndim != 3 or block.shape[2] != N_PARAMETERS:
        raise ShapeError(f"traits must be (rows, cols, {N_PARAMETERS}), got {block.shape}")
    ranges = ranges or default_ranges(0, len(soils) - 1)
    rows, cols = block.shape[:2]
    flat = np.ascontiguousarray(block.reshape(-1, N_PARAMETERS), dtype=np.float64)

    sentinel = flat == INVALID_TRAIT
    invalid = sentinel.all(axis=1)
    partial = sentinel.any(axis=1) & ~invalid
    if partial.any():
        pixel = int(np.flatnonzero(partial)[0])
        raise ParameterError(
            f"pixel ({pixel // cols}, {pixel % cols}) mixes sentinel and real traits"
        )

    out = np.zeros((rows * cols, coeffs.grid.count), dtype=np.float32)
    valid_rows = np.flatnonzero(~invalid)
    if valid_rows.size:
        candidate = flat[valid_rows]
        bad = ranges.violations(candidate, tolerance=FLOAT32_RANGE_TOLERANCE)
        if bad.any():
            row, trait = np.argwhere(bad)[0]
            pixel = int(valid_rows[row])
            raise ParameterError(
                f"trait {PARAMETER_NAMES[trait]} out of range at pixel "
                f"({pixel // cols}, {pixel % cols}): {candidate[row, trait]!r}"
            )
        out[valid_rows] = forward_batch(ranges.clip(candidate), coeffs, soils, cfg).astype(
            np.float32
        )
    return out.reshape(rows, cols, coeffs.grid.count)
