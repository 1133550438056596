"""Synthetic multiband input scenes with known ground truth.

Stands in for real satellite ingestion at desk scale: each tile gets
spatially smooth per-trait fields (seeded white noise blurred to a
configurable correlation length, then affinely mapped into the sampling
ranges), every pixel is forward-simulated and band-averaged to the sensor
band set, and optional Gaussian noise is added per band value.  Outputs are
deterministic per (seed, tile index): the noise stream is always drawn in
the same order and scaled by sigma, so sigma = 0 reproduces the noise-free
bands bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import gaussian_filter

from .errors import ConfigError
from .parameters import N_PARAMETERS, PARAMETER_NAMES, ParameterRanges
from .raster import RasterCube, write_raster
from .rtm import CoefficientTable, RtmConfig, SoilLibrary, forward_batch
from .spectral import BandSet, band_average_matrix

__all__ = ["SyntheticSceneSpec", "synthesize_tile", "generate_scene_inputs", "tile_id"]

#: Input-directory naming convention consumed by the dataset assembler.
BANDS_SUFFIX = "_bands"
TRUTH_SUFFIX = "_truth"
SCENE_CLASS_SUFFIX = "_scl"


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Scene geometry and randomness of the synthetic input generator."""

    tiles: int
    rows: int = 64
    cols: int = 64
    smoothness: float = 8.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tiles < 1:
            raise ConfigError(f"tiles must be >= 1, got {self.tiles}")
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"tile size must be positive, got {self.rows}x{self.cols}")
        if not np.isfinite(self.smoothness) or self.smoothness < 0:
            raise ConfigError(f"smoothness must be >= 0, got {self.smoothness}")
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def tile_id(index: int) -> str:
    return f"tile_{index:04d}"


def _truth_fields(
    spec: SyntheticSceneSpec, ranges: ParameterRanges, rng: np.random.Generator
) -> NDArray[np.float64]:
    lo, hi = ranges.minima, ranges.maxima
    degenerate = ranges.degenerate_mask()
    fields = np.empty((spec.rows, spec.cols, N_PARAMETERS), dtype=np.float64)
    for j in range(N_PARAMETERS):
        # One draw per trait regardless of degeneracy keeps the stream
        # layout independent of the configured ranges.
        noise = rng.standard_normal((spec.rows, spec.cols))
        if degenerate[j]:
            fields[:, :, j] = lo[j]
            continue
        smooth = gaussian_filter(noise, sigma=spec.smoothness, mode="reflect") if spec.smoothness > 0 else noise
        mn, mx = smooth.min(), smooth.max()
        if mx > mn:
            mapped = lo[j] + (smooth - mn) / (mx - mn) * (hi[j] - lo[j])
        else:
            mapped = np.full_like(smooth, 0.5 * (lo[j] + hi[j]))
        fields[:, :, j] = np.clip(mapped, lo[j], hi[j])
    return fields


def synthesize_tile(
    spec: SyntheticSceneSpec,
    tile_index: int,
    ranges: ParameterRanges,
    coeffs: CoefficientTable,
    soils: SoilLibrary,
    band_set: BandSet,
    rtm_cfg: RtmConfig | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float32]]:
    """Ground-truth traits and noisy sensor bands for one tile.

    Returns ``(truth, bands)``: truth is (rows, cols, 16) float64, bands is
    (rows, cols, n_bands) float32.  Band averages are taken over the
    float32-quantized simulated spectra — the representation lookup tables
    store — so a noise-free tile matches a table built from the same
    parameter vectors bit-exactly.
    """
    if not 0 <= tile_index < spec.tiles:
        raise ConfigError(f"tile index {tile_index} outside 0..{spec.tiles - 1}")
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, tile_index)))
    truth = _truth_fields(spec, ranges, rng)

    spectra = forward_batch(
        truth.reshape(-1, N_PARAMETERS), coeffs, soils, rtm_cfg
    ).astype(np.float32)
    bands = band_average_matrix(spectra, coeffs.grid, band_set)
    bands = bands + spec.noise_sigma * rng.standard_normal(bands.shape)
    return truth, bands.astype(np.float32).reshape(spec.rows, spec.cols, len(band_set))


def generate_scene_inputs(
    spec: SyntheticSceneSpec,
    ranges: ParameterRanges,
    coeffs: CoefficientTable,
    soils: SoilLibrary,
    band_set: BandSet,
    out_dir: str | Path,
    rtm_cfg: RtmConfig | None = None,
) -> list[str]:
    """Write ``<tile>_bands`` and ``<tile>_truth`` rasters for every tile.

    Returns the tile ids in order.  Re-running with the same spec rewrites
    byte-identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for index in range(spec.tiles):
        tid = tile_id(index)
        truth, bands = synthesize_tile(spec, index, ranges, coeffs, soils, band_set, rtm_cfg)
        write_raster(
            RasterCube(bands, band_names=band_set.names),
            out_dir / f"{tid}{BANDS_SUFFIX}",
        )
        write_raster(
            RasterCube(truth.astype(np.float32), band_names=PARAMETER_NAMES),
            out_dir / f"{tid}{TRUTH_SUFFIX}",
        )
        ids.append(tid)
    return ids
