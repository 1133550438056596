"""Per-tile output bundles: fixed file inventory, writer, and validator.

A finished tile lives at ``dataset_root/<region>/<tile_id>/`` and holds
five rasters, each as ``.img`` + ``.hdr``:

========================================  =============  ========
stem                                      shape          dtype
========================================  =============  ========
``surf_refl``                             64 x 64 x 211  float32
``traits``                                64 x 64 x 16   float32
``p5``                                    64 x 64 x 16   float32
``p95``                                   64 x 64 x 16   float32
``quality_scene_classification``          64 x 64 x 1    uint8
========================================  =============  ========

Trait rasters carry the canonical parameter names as band names;
``surf_refl`` records its wavelength axis.  The validator re-checks
everything the writer promises and reports violations instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import HsforgeError, ShapeError
from .inversion import INVALID_TRAIT
from .parameters import N_PARAMETERS, PARAMETER_NAMES
from .raster import RasterCube, read_raster, write_raster
from .spectral import SpectralGrid

__all__ = [
    "TILE_ROWS",
    "TILE_COLS",
    "TILE_STEMS",
    "TileBundle",
    "BundleReport",
    "write_tile_bundle",
    "validate_bundle",
]

TILE_ROWS = 64
TILE_COLS = 64

TILE_STEMS = ("surf_refl", "traits", "p5", "p95", "quality_scene_classification")

# Validation slack on stored reflectances: float32 rounding of values the
# model already bounds by 1 +/- 1e-9.
_REFLECTANCE_SLACK = 1e-6


@dataclass(frozen=True)
class TileBundle:
    """All arrays of one finished tile, validated on construction."""

    region: str
    tile_id: str
    surf_refl: NDArray[np.float32]
    traits: NDArray[np.float32]
    p5: NDArray[np.float32]
    p95: NDArray[np.float32]
    scene_class: NDArray[np.uint8]
    grid: SpectralGrid

    def __post_init__(self) -> None:
        if not self.region or "/" in self.region:
            raise ShapeError(f"invalid region name {self.region!r}")
        if not self.tile_id or "/" in self.tile_id:
            raise ShapeError(f"invalid tile id {self.tile_id!r}")
        expected = {
            "surf_refl": (TILE_ROWS, TILE_COLS, self.grid.count, np.float32),
            "traits": (TILE_ROWS, TILE_COLS, N_PARAMETERS, np.float32),
            "p5": (TILE_ROWS, TILE_COLS, N_PARAMETERS, np.float32),
            "p95": (TILE_ROWS, TILE_COLS, N_PARAMETERS, np.float32),
            "scene_class": (TILE_ROWS, TILE_COLS, 1, np.uint8),
        }
        for name, (r, c, b, dtype) in expected.items():
            arr = getattr(self, name)
            if arr.shape != (r, c, b):
                raise ShapeError(f"{name} must be ({r}, {c}, {b}), got {arr.shape}")
            if arr.dtype != dtype:
                raise ShapeError(f"{name} must be {np.dtype(dtype).name}, got {arr.dtype}")


def write_tile_bundle(
    bundle: TileBundle, dataset_root: str | Path, overwrite: bool = False
) -> list[Path]:
    """Write one tile directory; returns the ten file paths written."""
    tile_dir = Path(dataset_root) / bundle.region / bundle.tile_id
    if tile_dir.exists() and not overwrite:
        raise FileExistsError(f"tile directory already exists: {tile_dir}")
    tile_dir.mkdir(parents=True, exist_ok=True)

    trait_names = PARAMETER_NAMES
    wavelengths = tuple(bundle.grid.wavelengths.tolist())
    written: list[Path] = []
    written += write_raster(
        RasterCube(bundle.surf_refl, wavelengths=wavelengths), tile_dir / "surf_refl"
    )
    written += write_raster(RasterCube(bundle.traits, band_names=trait_names), tile_dir / "traits")
    written += write_raster(RasterCube(bundle.p5, band_names=trait_names), tile_dir / "p5")
    written += write_raster(RasterCube(bundle.p95, band_names=trait_names), tile_dir / "p95")
    written += write_raster(
        RasterCube(bundle.scene_class), tile_dir / "quality_scene_classification"
    )
    return written


@dataclass
class BundleReport:
    """Validation outcome for one tile directory."""

    tile_dir: Path
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _first_bad_pixel(mask: NDArray[np.bool_]) -> tuple[int, ...]:
    return tuple(int(v) for v in np.argwhere(mask)[0])


def validate_bundle(tile_dir: str | Path, grid_count: int = 211) -> BundleReport:
    """Check one tile directory against the bundle contract.

    Violations (missing/corrupt files, wrong shapes or dtypes, non-finite
    or out-of-range reflectances, broken p5 <= traits <= p95 ordering) are
    collected into the report; nothing raises for content problems.
    """
    tile_dir = Path(tile_dir)
    report = BundleReport(tile_dir=tile_dir)
    expected = {
        "surf_refl": ((TILE_ROWS, TILE_COLS, grid_count), "float32"),
        "traits": ((TILE_ROWS, TILE_COLS, N_PARAMETERS), "float32"),
        "p5": ((TILE_ROWS, TILE_COLS, N_PARAMETERS), "float32"),
        "p95": ((TILE_ROWS, TILE_COLS, N_PARAMETERS), "float32"),
        "quality_scene_classification": ((TILE_ROWS, TILE_COLS, 1), "uint8"),
    }
    cubes: dict[str, RasterCube] = {}
    for stem, (shape, dtype_name) in expected.items():
        try:
            cube = read_raster(tile_dir / stem)
        except HsforgeError as err:
            report.violations.append(f"{stem}: {err}")
            continue
        if cube.data.shape != shape:
            report.violations.append(
                f"{stem}: shape {cube.data.shape}, expected {shape}"
            )
            continue
        if cube.data.dtype.name != dtype_name:
            report.violations.append(
                f"{stem}: dtype {cube.data.dtype.name}, expected {dtype_name}"
            )
            continue
        cubes[stem] = cube

    if "surf_refl" in cubes:
        refl = cubes["surf_refl"].data
        finite = np.isfinite(refl)
        if not finite.all():
            r, c, b = _first_bad_pixel(~finite)
            report.violations.append(
                f"surf_refl: non-finite value at pixel ({r}, {c}), band {b}"
            )
        else:
            in_range = (refl >= -_REFLECTANCE_SLACK) & (refl <= 1.0 + _REFLECTANCE_SLACK)
            bad = ~(in_range | (refl == np.float32(INVALID_TRAIT)))
            if bad.any():
                r, c, b = _first_bad_pixel(bad)
                report.violations.append(
                    f"surf_refl: reflectance {refl[r, c, b]!r} outside [0, 1] "
                    f"at pixel ({r}, {c}), band {b}"
                )

    if all(stem in cubes for stem in ("traits", "p5", "p95")):
        traits = cubes["traits"].data
        p5 = cubes["p5"].data
        p95 = cubes["p95"].data
        for name, arr in (("traits", traits), ("p5", p5), ("p95", p95)):
            if not np.isfinite(arr).all():
                r, c, b = _first_bad_pixel(~np.isfinite(arr))
                report.violations.append(
                    f"{name}: non-finite value at pixel ({r}, {c}), band {b}"
                )
        low_bad = p5 > traits
        high_bad = traits > p95
        if low_bad.any():
            r, c, b = _first_bad_pixel(low_bad)
            report.violations.append(
                f"ordering: p5 > traits for {PARAMETER_NAMES[b]} at pixel ({r}, {c})"
            )
        if high_bad.any():
            r, c, b = _first_bad_pixel(high_bad)
            report.violations.append(
                f"ordering: traits > p95 for {PARAMETER_NAMES[b]} at pixel ({r}, {c})"
            )
    return report
