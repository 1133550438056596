"""Wavelength grids, sampled spectra, and the boxcar sensor band model.

The whole pipeline works on one uniform wavelength grid.  Spectra are plain
float64 vectors aligned to that grid; sensor bands are boxcar windows that
average the grid samples falling inside them.  Band membership uses
inclusive endpoints, so a band edge that lands exactly on a grid sample
includes that sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import BandCoverageError, ConfigError, GridError, ShapeError

__all__ = [
    "SpectralGrid",
    "Spectrum",
    "SensorBand",
    "BandSet",
    "make_grid",
    "canonical_grid",
    "band_average",
    "band_average_matrix",
    "default_sensor_bands",
    "load_band_set",
    "save_band_set",
]

#: Default working range of the simulator, in nanometres.
DEFAULT_START_NM = 400.0
DEFAULT_END_NM = 2500.0
DEFAULT_STEP_NM = 10.0

#: Boxcar bands of the default multispectral sensor: (name, center, width) in nm.
DEFAULT_BANDS: tuple[tuple[str, float, float], ...] = (
    ("B1", 443.0, 21.0),
    ("B2", 490.0, 66.0),
    ("B3", 560.0, 36.0),
    ("B4", 665.0, 31.0),
    ("B5", 705.0, 15.0),
    ("B6", 740.0, 15.0),
    ("B7", 783.0, 20.0),
    ("B8", 842.0, 115.0),
    ("B8A", 865.0, 21.0),
    ("B9", 945.0, 20.0),
    ("B11", 1610.0, 90.0),
    ("B12", 2190.0, 180.0),
)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform wavelength grid: ``start_nm + i * step_nm`` for ``i < count``."""

    start_nm: float
    step_nm: float
    count: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.start_nm) or self.start_nm <= 0:
            raise GridError(f"grid start must be a positive wavelength, got {self.start_nm}")
        if not np.isfinite(self.step_nm) or self.step_nm <= 0:
            raise GridError(f"grid step must be positive, got {self.step_nm}")
        if self.count < 1:
            raise GridError(f"grid needs at least 1 sample, got {self.count}")

    @cached_property
    def wavelengths(self) -> NDArray[np.float64]:
        """All sample wavelengths in nm, ascending (read-only array)."""
        wl = self.start_nm + self.step_nm * np.arange(self.count, dtype=np.float64)
        wl.flags.writeable = False
        return wl

    @property
    def end_nm(self) -> float:
        return self.start_nm + self.step_nm * (self.count - 1)

    def __len__(self) -> int:
        return self.count


def make_grid(start_nm: float, end_nm: float, step_nm: float) -> SpectralGrid:
    """Build the uniform grid covering ``[start_nm, end_nm]`` at ``step_nm``.

    The span must be an exact whole multiple of the step (within one part in
    1e9) so the last sample lands on ``end_nm`` exactly.  ``end_nm equal to
    start_nm`` yields a single-point grid.
    """
    if end_nm < start_nm:
        raise GridError(f"grid end ({end_nm}) must not precede start ({start_nm})")
    if step_nm <= 0:
        raise GridError(f"grid step must be positive, got {step_nm}")
    span_steps = (end_nm - start_nm) / step_nm
    rounded = round(span_steps)
    if abs(span_steps - rounded) > 1e-9 * max(1.0, abs(span_steps)):
        raise GridError(
            f"span {start_nm}..{end_nm} is not a whole multiple of step {step_nm}"
        )
    return SpectralGrid(float(start_nm), float(step_nm), int(rounded) + 1)


def canonical_grid() -> SpectralGrid:
    """The default 400-2500 nm grid at 10 nm spacing (211 samples)."""
    return make_grid(DEFAULT_START_NM, DEFAULT_END_NM, DEFAULT_STEP_NM)


@dataclass(frozen=True)
class Spectrum:
    """A float64 vector sampled on a :class:`SpectralGrid`."""

    grid: SpectralGrid
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ShapeError(f"spectrum values must be 1-D, got shape {values.shape}")
        if values.shape[0] != self.grid.count:
            raise ShapeError(
                f"spectrum has {values.shape[0]} samples but grid has {self.grid.count}"
            )
        if not np.all(np.isfinite(values)):
            raise ShapeError("spectrum values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.grid.count


@dataclass(frozen=True)
class SensorBand:
    """A boxcar band: averages grid samples in ``[center - width/2, center + width/2]``."""

    name: str
    center_nm: float
    width_nm: float

    def __post_init__(self) -> None:
        if not self.name or any(ch in self.name for ch in ",{}\n"):
            raise ConfigError(f"invalid band name {self.name!r}")
        if not np.isfinite(self.center_nm) or self.center_nm <= 0:
            raise ConfigError(f"band {self.name}: center must be positive, got {self.center_nm}")
        if not np.isfinite(self.width_nm) or self.width_nm <= 0:
            raise ConfigError(f"band {self.name}: width must be positive, got {self.width_nm}")

    @property
    def lower_nm(self) -> float:
        return self.center_nm - 0.5 * self.width_nm

    @property
    def upper_nm(self) -> float:
        return self.center_nm + 0.5 * self.width_nm

    def sample_mask(self, grid: SpectralGrid) -> NDArray[np.bool_]:
        """Boolean mask of grid samples inside the band (endpoints included)."""
        wl = grid.wavelengths
        return (wl >= self.lower_nm) & (wl <= self.upper_nm)


class BandSet:
    """An ordered collection of uniquely named sensor bands."""

    def __init__(self, bands: Sequence[SensorBand]):
        bands = tuple(bands)
        if not bands:
            raise ConfigError("a band set needs at least one band")
        names = [b.name for b in bands]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ConfigError(f"duplicate band names: {', '.join(dupes)}")
        self._bands = bands
        self._index = {b.name: i for i, b in enumerate(bands)}

    @property
    def bands(self) -> tuple[SensorBand, ...]:
        return self._bands

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self._bands)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ConfigError(f"unknown band {name!r}") from None

    def __len__(self) -> int:
        return len(self._bands)

    def __iter__(self) -> Iterator[SensorBand]:
        return iter(self._bands)

    def __getitem__(self, i: int) -> SensorBand:
        return self._bands[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BandSet):
            return NotImplemented
        return self._bands == other._bands

    def __repr__(self) -> str:
        return f"BandSet({list(self.names)})"

    def sample_masks(self, grid: SpectralGrid) -> NDArray[np.bool_]:
        """(n_bands, n_samples) membership masks; every band must be non-empty."""
        masks = np.stack([b.sample_mask(grid) for b in self._bands])
        empty = ~masks.any(axis=1)
        if empty.any():
            missing = [self._bands[i].name for i in np.flatnonzero(empty)]
            raise BandCoverageError(
                f"bands with no grid sample on {grid.start_nm}-{grid.end_nm} nm: "
                + ", ".join(missing)
            )
        return masks


def default_sensor_bands() -> BandSet:
    """The 12-band boxcar model of the default multispectral sensor."""
    return BandSet([SensorBand(n, c, w) for n, c, w in DEFAULT_BANDS])


def band_average(spectrum: Spectrum, band: SensorBand) -> float:
    """Unweighted mean of the spectrum samples inside one band.

    Delegates to :func:`band_average_matrix` so the scalar and batched
    paths agree bit for bit.
    """
    mask = band.sample_mask(spectrum.grid)
    if not mask.any():
        raise BandCoverageError(
            f"band {band.name} ({band.lower_nm}-{band.upper_nm} nm) covers no grid sample"
        )
    return float(
        band_average_matrix(spectrum.values[None, :], spectrum.grid, BandSet([band]))[0, 0]
    )


def band_average_matrix(
    spectra: NDArray[np.floating], grid: SpectralGrid, band_set: BandSet
) -> NDArray[np.float64]:
    """Band-average many spectra at once.

    ``spectra`` is (n_spectra, n_samples); the result is (n_spectra, n_bands)
    in band-set order.  Samples are accumulated in float64 in ascending
    wavelength order — a fixed association, so results are reproducible to
    the bit regardless of input dtype (float32 inputs reduce exactly like
    their promoted copies) and of library reduction internals.
    """
    spectra = np.asarray(spectra)
    if spectra.ndim != 2 or spectra.shape[1] != grid.count:
        raise ShapeError(
            f"expected (n, {grid.count}) spectra, got shape {spectra.shape}"
        )
    masks = band_set.sample_masks(grid)
    out = np.empty((spectra.shape[0], len(band_set)), dtype=np.float64)
    for j in range(len(band_set)):
        cols = np.flatnonzero(masks[j])
        acc = np.zeros(spectra.shape[0], dtype=np.float64)
        for c in cols:
            acc += spectra[:, c]
        out[:, j] = acc / cols.size
    return out


def save_band_set(band_set: BandSet, path: str | Path) -> None:
    """Write bands as ``name,center_nm,width_nm`` CSV lines."""
    lines = ["# name,center_nm,width_nm"]
    lines += [f"{b.name},{b.center_nm!r},{b.width_nm!r}" for b in band_set]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_band_set(path: str | Path) -> BandSet:
    """Read a band set written by :func:`save_band_set`.

    Blank lines and ``#`` comments are ignored.  Each data line must be
    ``name,center_nm,width_nm``.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"band set file not found: {path}")
    bands: list[SensorBand] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"{path}:{lineno}: expected name,center,width, got {raw!r}")
        try:
            center, width = float(parts[1]), float(parts[2])
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: non-numeric band geometry in {raw!r}") from None
        bands.append(SensorBand(parts[0], center, width))
    if not bands:
        raise ConfigError(f"{path}: no bands defined")
    return BandSet(bands)
