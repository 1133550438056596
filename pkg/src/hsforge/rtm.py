"""Reference canopy reflectance model.

The model maps a 16-entry canopy parameter vector to a top-of-canopy
reflectance spectrum in three stages:

1. **Leaf optics** — a plate-stack model.  Biochemical contents scale
   tabulated specific absorption spectra into a per-layer absorption ``k``;
   an elementary plate with interface reflectance ``r_if`` and internal
   transmittance ``exp(-k)`` is stacked ``n_struct`` times by classical
   layer-adding, with linear interpolation between integer stack sizes.
2. **Canopy scattering** — a two-stream slab.  Leaf single-scattering
   albedo and backscatter fraction give effective attenuation/scattering
   rates; the slab of optical depth LAI has closed-form reflectance and
   transmittance, coupled to a Lambertian soil below by an infinite-series
   (geometric) multiple-bounce term.
3. **Bidirectional gap correction** — a hotspot-weighted joint gap
   probability ``P_so`` mixes bare-soil and vegetated contributions, with
   the correlation between sun and view paths decaying in phase angle at
   rate ``1/hspot``.

All spectra live on one :class:`~hsforge.spectral.SpectralGrid`.  The
absorption/interface tables are data (:class:`CoefficientTable`), so
externally published coefficient sets load through the same CSV format as
the built-in generator's output.

Everything here is pure and deterministic: identical inputs produce
bit-identical outputs, and batched evaluation reproduces single-vector
evaluation exactly (the single-vector entry points delegate to the batch
kernels with N = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import (
    ConfigError,
    ConsistencyError,
    GeometryError,
    GridError,
    ParameterError,
    ShapeError,
    TableFormatError,
)
from .parameters import N_PARAMETERS, ParameterVector
from .spectral import SpectralGrid, Spectrum

__all__ = [
    "CoefficientTable",
    "LeafOptics",
    "SoilLibrary",
    "RtmConfig",
    "generate_reference_coefficients",
    "generate_reference_soils",
    "save_coefficients",
    "load_coefficients",
    "save_soils",
    "load_soils",
    "leaf_optics",
    "leaf_optics_batch",
    "single_plate",
    "add_layers",
    "g_function",
    "canopy_reflectance",
    "forward",
    "forward_batch",
    "REGION_SOIL_COEFFS",
]

#: Tolerance on the leaf energy budget: rho + tau may exceed 1 by at most this.
ENERGY_TOLERANCE = 1e-9

#: Bounds tolerance on the final canopy reflectance (fail loud outside).
OUTPUT_TOLERANCE = 1e-9

#: Below this effective attenuation rate the two-stream slab switches to its
#: conservative-scattering closed form (the general form becomes 0/0).
CONSERVATIVE_GAMMA = 1e-9

#: Linear soil generator (offset, slope-over-full-range) per region name.
REGION_SOIL_COEFFS: dict[str, tuple[float, float]] = {
    "africa": (0.10, 0.35),
    "france": (0.06, 0.22),
    "spain": (0.12, 0.40),
    "india": (0.08, 0.30),
}

_COEFF_COLUMNS = ("k_ab", "k_ar", "k_ant", "k_brown", "k_w", "k_m", "r_if")
_WAVELENGTH_MATCH_NM = 1e-6


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


def _frozen_spectral_array(
    values: NDArray[np.floating] | Iterable[float], grid: SpectralGrid, label: str
) -> NDArray[np.float64]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (grid.count,):
        raise ShapeError(f"{label}: expected {grid.count} samples, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{label}: values must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CoefficientTable:
    """Specific absorption spectra and interface reflectance of the leaf model.

    ``k_ab``/``k_ar``/``k_ant`` are per-unit-content absorption for
    chlorophyll, carotenoids, and anthocyanins (cm²/µg); ``k_w``/``k_m``
    for water and dry matter (cm²/g); ``k_brown`` is a unitless scaling for
    brown pigment.  ``r_if`` is the air/leaf interface reflectance in
    [0, 0.5).
    """

    grid: SpectralGrid
    k_ab: NDArray[np.float64]
    k_ar: NDArray[np.float64]
    k_ant: NDArray[np.float64]
    k_brown: NDArray[np.float64]
    k_w: NDArray[np.float64]
    k_m: NDArray[np.float64]
    r_if: NDArray[np.float64]

    def __post_init__(self) -> None:
        for name in _COEFF_COLUMNS:
            arr = _frozen_spectral_array(getattr(self, name), self.grid, name)
            if np.any(arr < 0):
                raise ConfigError(f"{name}: absorption/interface spectra must be non-negative")
            object.__setattr__(self, name, arr)
        if np.any(self.r_if >= 0.5):
            raise ConfigError("r_if must stay below 0.5")

    def column(self, name: str) -> NDArray[np.float64]:
        if name not in _COEFF_COLUMNS:
            raise ConfigError(f"unknown coefficient column {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class LeafOptics:
    """Directional-hemispherical leaf reflectance and transmittance."""

    rho_leaf: Spectrum
    tau_leaf: Spectrum

    def __post_init__(self) -> None:
        if self.rho_leaf.grid != self.tau_leaf.grid:
            raise ShapeError("leaf reflectance and transmittance must share one grid")
        rho, tau = self.rho_leaf.values, self.tau_leaf.values
        if np.any(rho < 0) or np.any(tau < 0):
            raise ConsistencyError("negative leaf reflectance or transmittance")
        excess = np.max(rho + tau) - 1.0
        if excess > ENERGY_TOLERANCE:
            raise ConsistencyError(
                f"leaf energy budget violated: rho + tau exceeds 1 by {excess:.3e}"
            )

    @property
    def grid(self) -> SpectralGrid:
        return self.rho_leaf.grid


class SoilLibrary:
    """Named soil reflectance spectra sharing the pipeline grid.

    Index order is construction order and is stable across save/load, so a
    ``soil_index`` parameter value keeps meaning the same spectrum.
    """

    def __init__(self, names: Sequence[str], spectra: Sequence[Spectrum]):
        names = tuple(names)
        if not names:
            raise ConfigError("a soil library needs at least one spectrum")
        if len(set(names)) != len(names):
            raise ConfigError("duplicate soil names")
        if len(spectra) != len(names):
            raise ConfigError(f"{len(names)} names but {len(spectra)} spectra")
        grid = spectra[0].grid
        values = np.empty((len(names), grid.count), dtype=np.float64)
        for i, spectrum in enumerate(spectra):
            if spectrum.grid != grid:
                raise ShapeError(f"soil {names[i]!r} is not on the shared grid")
            if np.any(spectrum.values < 0) or np.any(spectrum.values > 1):
                raise ConfigError(f"soil {names[i]!r} has reflectance outside [0, 1]")
            values[i] = spectrum.values
        values.flags.writeable = False
        self._names = names
        self._grid = grid
        self._values = values

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def grid(self) -> SpectralGrid:
        return self._grid

    @property
    def values(self) -> NDArray[np.float64]:
        """(n_soils, n_samples) reflectance matrix (read-only)."""
        return self._values

    def __len__(self) -> int:
        return len(self._names)

    def spectrum(self, index: int) -> Spectrum:
        if not 0 <= index < len(self._names):
            raise ParameterError(f"soil index {index} outside 0..{len(self._names) - 1}")
        return Spectrum(self._grid, self._values[index])

    def index(self, name: str) -> int:
        try:
            return self._names.index(name)
        except ValueError:
            raise ConfigError(
                f"unknown soil {name!r}; library has: {', '.join(self._names)}"
            ) from None


@dataclass(frozen=True)
class RtmConfig:
    """Model-level knobs independent of the per-pixel parameters.

    ``k_d`` is the diffuse extinction rate per unit LAI of the two-stream
    slab.  ``max_zenith_deg`` rejects geometries close enough to grazing
    that the 1/cos(zenith) path-length terms blow up; in-range parameter
    vectors (zeniths at most 80 degrees) never trigger it.
    """

    k_d: float = 1.0
    max_zenith_deg: float = 85.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.k_d) or self.k_d <= 0:
            raise ConfigError(f"k_d must be positive, got {self.k_d}")
        if not 0 < self.max_zenith_deg < 90:
            raise ConfigError(
                f"max_zenith_deg must lie in (0, 90), got {self.max_zenith_deg}"
            )


# ---------------------------------------------------------------------------
# reference tables
# ---------------------------------------------------------------------------


def _gaussian(wl: NDArray[np.float64], mu: float, sigma: float, amp: float) -> NDArray[np.float64]:
    return amp * np.exp(-((wl - mu) ** 2) / (2.0 * sigma**2))


def generate_reference_coefficients(grid: SpectralGrid) -> CoefficientTable:
    """Deterministic closed-form coefficient table.

    Gaussian absorption features are placed at the classical pigment and
    water positions (chlorophyll 430/662 nm, carotenoids 470 nm,
    anthocyanins 550 nm, water 1200/1450/1940 nm); brown pigment decays
    exponentially from the blue edge and dry matter rises linearly beyond
    800 nm with a broad 2100 nm feature.  The interface reflectance is the
    normal-incidence value 0.04 of a refractive index of 1.5.  Amplitudes
    are design values shaped for the default 400-2500 nm range; real
    published tables can replace this via :func:`load_coefficients`.
    """
    wl = grid.wavelengths
    return CoefficientTable(
        grid=grid,
        k_ab=_gaussian(wl, 430.0, 30.0, 0.06) + _gaussian(wl, 662.0, 25.0, 0.08),
        k_ar=_gaussian(wl, 470.0, 30.0, 0.08),
        k_ant=_gaussian(wl, 550.0, 25.0, 0.05),
        k_brown=0.8 * np.exp(-(wl - 400.0) / 250.0),
        k_w=_gaussian(wl, 1200.0, 50.0, 10.0)
        + _gaussian(wl, 1450.0, 60.0, 20.0)
        + _gaussian(wl, 1940.0, 70.0, 35.0),
        k_m=1.5 * np.maximum(0.0, (wl - 800.0) / 1700.0) + _gaussian(wl, 2100.0, 300.0, 6.0),
        r_if=np.full(grid.count, 0.04),
    )


def generate_reference_soils(grid: SpectralGrid, region_names: Sequence[str]) -> SoilLibrary:
    """One smooth linear-ramp soil spectrum per named region.

    Each region has fixed (offset, slope) coefficients; the ramp runs over
    the 400-2500 nm span and is clipped to [0.02, 0.6], keeping every
    spectrum safely inside [0, 1].
    """
    region_names = list(region_names)
    if not region_names:
        raise ConfigError("need at least one region name")
    wl = grid.wavelengths
    spectra = []
    for region in region_names:
        try:
            c0, c1 = REGION_SOIL_COEFFS[region]
        except KeyError:
            known = ", ".join(sorted(REGION_SOIL_COEFFS))
            raise ConfigError(f"unknown region {region!r}; built-in regions: {known}") from None
        ramp = c0 + c1 * (wl - 400.0) / 2100.0
        spectra.append(Spectrum(grid, np.clip(ramp, 0.02, 0.6)))
    return SoilLibrary(region_names, spectra)


# ---------------------------------------------------------------------------
# CSV persistence (shared by coefficient tables and soil libraries)
# ---------------------------------------------------------------------------


def _write_csv(path: str | Path, header: Sequence[str], columns: Sequence[NDArray[np.float64]]) -> None:
    lines = [",".join(header)]
    rows = len(columns[0])
    for i in range(rows):
        lines.append(",".join(repr(float(col[i])) for col in columns))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_csv(path: str | Path) -> tuple[list[str], NDArray[np.float64]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"table file not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise TableFormatError(f"{path}: empty table")
    header = [h.strip() for h in lines[0].split(",")]
    data = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise TableFormatError(f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}")
        try:
            data.append([float(p) for p in parts])
        except ValueError:
            raise TableFormatError(f"{path}:{lineno}: non-numeric value") from None
    if not data:
        raise TableFormatError(f"{path}: no data rows")
    return header, np.asarray(data, dtype=np.float64)


def _check_wavelength_column(wl: NDArray[np.float64], grid: SpectralGrid, path: str | Path) -> None:
    if wl.shape[0] != grid.count:
        raise GridError(
            f"{path}: {wl.shape[0]} rows but the working grid has {grid.count} samples"
        )
    if np.any(np.diff(wl) <= 0):
        raise GridError(f"{path}: wavelengths must be strictly increasing")
    if np.max(np.abs(wl - grid.wavelengths)) > _WAVELENGTH_MATCH_NM:
        raise GridError(f"{path}: wavelengths do not match the working grid")


def save_coefficients(table: CoefficientTable, path: str | Path) -> None:
    """Write ``wavelength_nm,k_ab,k_ar,k_ant,k_brown,k_w,k_m,r_if`` CSV."""
    _write_csv(
        path,
        ("wavelength_nm", *_COEFF_COLUMNS),
        [table.grid.wavelengths, *(getattr(table, c) for c in _COEFF_COLUMNS)],
    )


def load_coefficients(path: str | Path, grid: SpectralGrid) -> CoefficientTable:
    """Read a coefficient CSV, validating exact agreement with ``grid``."""
    header, data = _read_csv(path)
    expected = ["wavelength_nm", *_COEFF_COLUMNS]
    if header != expected:
        raise TableFormatError(f"{path}: header must be {','.join(expected)}")
    _check_wavelength_column(data[:, 0], grid, path)
    cols = {name: data[:, i + 1] for i, name in enumerate(_COEFF_COLUMNS)}
    return CoefficientTable(grid=grid, **cols)


def save_soils(library: SoilLibrary, path: str | Path) -> None:
    """Write ``wavelength_nm,<name1>,<name2>,...`` CSV."""
    _write_csv(
        path,
        ("wavelength_nm", *library.names),
        [library.grid.wavelengths, *(library.values[i] for i in range(len(library)))],
    )


def load_soils(path: str | Path, grid: SpectralGrid) -> SoilLibrary:
    """Read a soil CSV, validating exact agreement with ``grid``."""
    header, data = _read_csv(path)
    if len(header) < 2 or header[0] != "wavelength_nm":
        raise TableFormatError(f"{path}: header must start with wavelength_nm and name one soil")
    _check_wavelength_column(data[:, 0], grid, path)
    names = header[1:]
    spectra = [Spectrum(grid, data[:, i + 1]) for i in range(len(names))]
    return SoilLibrary(names, spectra)


# ---------------------------------------------------------------------------
# leaf optics
# ---------------------------------------------------------------------------


def single_plate(
    r: NDArray[np.float64] | float, t: NDArray[np.float64] | float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Reflectance/transmittance of one plate.

    The plate has interface reflectance ``r`` on both faces and internal
    (one-pass) transmittance ``t``; the closed forms sum the internal
    bounce series.  With no absorption (``t = 1``) the plate is lossless:
    rho + tau = 2r/(1+r) + (1-r)/(1+r) = 1 exactly.
    """
    r = np.asarray(r, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    denom = 1.0 - r * r * t * t
    rho = r + (1.0 - r) ** 2 * r * t * t / denom
    tau = (1.0 - r) ** 2 * t / denom
    return rho, tau


def add_layers(
    rho_a: NDArray[np.float64],
    tau_a: NDArray[np.float64],
    rho_b: NDArray[np.float64],
    tau_b: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Combine two symmetric layers (a above b) by summing the bounce series."""
    denom = 1.0 - rho_a * rho_b
    rho = rho_a + tau_a * tau_a * rho_b / denom
    tau = tau_a * tau_b / denom
    return rho, tau


def leaf_optics_batch(
    params: NDArray[np.float64], coeffs: CoefficientTable
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Plate-stack leaf optics for an (N, 16) parameter block.

    Returns (rho, tau), each (N, n_samples) float64.  The per-layer
    absorption is the content-weighted sum of the coefficient spectra
    divided by ``n_struct``; stacks for the integer plate counts bracketing
    ``n_struct`` are combined by linear interpolation.
    """
    P = np.asarray(params, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != N_PARAMETERS:
        raise ShapeError(f"expected (N, {N_PARAMETERS}) parameters, got {P.shape}")
    n = P[:, 0]
    if np.any(~np.isfinite(n)) or np.any(n < 1.0):
        raise ParameterError("n_struct must be >= 1")
    contents = P[:, 1:7]
    if np.any(contents < 0):
        raise ParameterError("leaf contents must be non-negative")

    k = (
        P[:, 1:2] * coeffs.k_ab[None, :]
        + P[:, 2:3] * coeffs.k_ar[None, :]
        + P[:, 3:4] * coeffs.k_ant[None, :]
        + P[:, 4:5] * coeffs.k_brown[None, :]
        + P[:, 5:6] * coeffs.k_w[None, :]
        + P[:, 6:7] * coeffs.k_m[None, :]
    ) / n[:, None]
    t = np.exp(-k)
    r = np.broadcast_to(coeffs.r_if[None, :], k.shape)
    rho_one, tau_one = single_plate(r, t)

    max_plates = int(np.ceil(np.max(n)))
    rho_stacks = [rho_one]
    tau_stacks = [tau_one]
    for _ in range(2, max_plates + 1):
        rho_m, tau_m = add_layers(rho_stacks[-1], tau_stacks[-1], rho_one, tau_one)
        rho_stacks.append(rho_m)
        tau_stacks.append(tau_m)

    floor_count = np.floor(n).astype(np.int64)
    ceil_count = np.ceil(n).astype(np.int64)
    weight = (n - floor_count)[:, None]
    rows = np.arange(P.shape[0])
    rho_all = np.stack(rho_stacks)
    tau_all = np.stack(tau_stacks)
    rho = (1.0 - weight) * rho_all[floor_count - 1, rows] + weight * rho_all[ceil_count - 1, rows]
    tau = (1.0 - weight) * tau_all[floor_count - 1, rows] + weight * tau_all[ceil_count - 1, rows]

    excess = np.max(rho + tau) - 1.0
    if np.any(rho < 0) or np.any(tau < 0) or excess > ENERGY_TOLERANCE:
        raise ConsistencyError(
            f"leaf model produced a non-physical result (energy excess {excess:.3e})"
        )
    return rho, tau


def leaf_optics(
    params: ParameterVector | NDArray[np.float64], coeffs: CoefficientTable
) -> LeafOptics:
    """Leaf reflectance/transmittance spectra for one parameter vector."""
    arr = params.to_array() if isinstance(params, ParameterVector) else np.asarray(params)
    rho, tau = leaf_optics_batch(arr[None, :], coeffs)
    return LeafOptics(Spectrum(coeffs.grid, rho[0]), Spectrum(coeffs.grid, tau[0]))


# ---------------------------------------------------------------------------
# canopy scattering
# ---------------------------------------------------------------------------


def _g_batch(zenith_deg: NDArray[np.float64], leaf_angle_deg: NDArray[np.float64]) -> NDArray[np.float64]:
    theta = np.deg2rad(zenith_deg)
    theta_l = np.deg2rad(leaf_angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cos_l, sin_l = np.cos(theta_l), np.sin(theta_l)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot_product = np.where(sin_t > 0, (cos_t / sin_t) * (cos_l / sin_l), np.inf)
    base = cos_t * cos_l
    direct = (np.abs(cot_product) >= 1.0) | (theta == 0.0)
    psi = np.arccos(np.clip(cot_product, -1.0, 1.0))
    partial = base * (1.0 + (2.0 / np.pi) * (np.tan(psi) - psi))
    return np.where(direct, base, partial)


def g_function(zenith_deg: float, leaf_angle_deg: float) -> float:
    """Mean projection of unit leaf area onto the direction at ``zenith_deg``.

    Leaves share one inclination angle with uniformly random azimuths.
    When the sun is high enough that every leaf faces it (the cotangent
    product reaches 1), the projection is exactly cos(zenith)·cos(leaf
    angle); lower sun positions see some leaves edge-on or from behind,
    handled by the partial-illumination branch.
    """
    if not 0.0 <= zenith_deg < 90.0:
        raise GeometryError(f"zenith must lie in [0, 90), got {zenith_deg}")
    if not 0.0 < leaf_angle_deg < 90.0:
        raise ParameterError(f"leaf angle must lie in (0, 90), got {leaf_angle_deg}")
    return float(
        _g_batch(np.asarray([zenith_deg], dtype=np.float64), np.asarray([leaf_angle_deg], dtype=np.float64))[0]
    )


def _canopy_batch(
    rho_leaf: NDArray[np.float64],
    tau_leaf: NDArray[np.float64],
    soil: NDArray[np.float64],
    params: NDArray[np.float64],
    cfg: RtmConfig,
) -> NDArray[np.float64]:
    """Two-stream + gap-probability canopy for (N, n_samples) leaf/soil blocks."""
    P = params
    lai = P[:, 7]
    lidf = P[:, 8]
    hspot = P[:, 11]
    theta_s = P[:, 13]
    theta_v = P[:, 14]
    phi = P[:, 15]

    if np.any(lai < 0):
        raise ParameterError("lai must be non-negative")
    if np.any(hspot <= 0):
        raise ParameterError("hspot must be positive")
    if np.any(lidf <= 0) or np.any(lidf >= 90):
        raise ParameterError("lidfa must lie in (0, 90) degrees")
    for name, zen in (("theta_s", theta_s), ("theta_v", theta_v)):
        if np.any(zen < 0) or np.any(zen >= cfg.max_zenith_deg):
            bad = int(np.flatnonzero((zen < 0) | (zen >= cfg.max_zenith_deg))[0])
            raise GeometryError(
                f"{name}={zen[bad]} at entry {bad} outside [0, {cfg.max_zenith_deg})"
            )

    ts = np.deg2rad(theta_s)
    tv = np.deg2rad(theta_v)
    k_sun = _g_batch(theta_s, lidf) / np.cos(ts)
    k_view = _g_batch(theta_v, lidf) / np.cos(tv)

    cos_xi = np.clip(
        np.cos(ts) * np.cos(tv) + np.sin(ts) * np.sin(tv) * np.cos(np.deg2rad(phi)),
        -1.0,
        1.0,
    )
    xi = np.arccos(cos_xi)
    hotspot = np.exp(-xi / hspot)
    p_gap = np.exp(-(k_sun + k_view - np.sqrt(k_sun * k_view) * hotspot) * lai)

    omega = rho_leaf + tau_leaf
    with np.errstate(divide="ignore", invalid="ignore"):
        backscatter = np.where(omega > 0, 0.5 + 0.5 * (rho_leaf - tau_leaf) / omega, 0.5)
    attenuate = cfg.k_d * (1.0 - omega * (1.0 - backscatter))
    scatter = cfg.k_d * omega * backscatter
    gamma = np.sqrt(np.maximum(attenuate * attenuate - scatter * scatter, 0.0))

    lai_col = lai[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        r_inf = scatter / (attenuate + gamma)
        decay = np.exp(-gamma * lai_col)
        denom = 1.0 - r_inf * r_inf * decay * decay
        slab_r_general = r_inf * (1.0 - decay * decay) / denom
        slab_t_general = (1.0 - r_inf * r_inf) * decay / denom
    depth = scatter * lai_col
    conservative = gamma < CONSERVATIVE_GAMMA
    slab_r = np.where(conservative, depth / (1.0 + depth), slab_r_general)
    slab_t = np.where(conservative, 1.0 / (1.0 + depth), slab_t_general)

    vegetated = slab_r + slab_t * slab_t * soil / (1.0 - slab_r * soil)
    out = p_gap[:, None] * soil + (1.0 - p_gap[:, None]) * vegetated

    bad = ~np.isfinite(out) | (out < -OUTPUT_TOLERANCE) | (out > 1.0 + OUTPUT_TOLERANCE)
    if bad.any():
        entry, sample = np.argwhere(bad)[0]
        raise ConsistencyError(
            f"canopy reflectance out of bounds at entry {entry}, sample {sample}: "
            f"{out[entry, sample]!r}"
        )
    return out


def canopy_reflectance(
    leaf: LeafOptics,
    soil: Spectrum,
    params: ParameterVector | NDArray[np.float64],
    cfg: RtmConfig | None = None,
) -> Spectrum:
    """Top-of-canopy reflectance for one parameter vector.

    Combines the bidirectional gap probability (bare-soil fraction) with
    the two-stream vegetated column over the same soil.  With LAI = 0 the
    gap probability is exactly 1 and the soil spectrum is returned
    unchanged.
    """
    cfg = cfg or RtmConfig()
    arr = params.to_array() if isinstance(params, ParameterVector) else np.asarray(params, dtype=np.float64)
    if arr.shape != (N_PARAMETERS,):
        raise ShapeError(f"expected a 16-entry parameter vector, got shape {arr.shape}")
    if leaf.grid != soil.grid:
        raise ShapeError("leaf optics and soil spectrum must share one grid")
    out = _canopy_batch(
        leaf.rho_leaf.values[None, :],
        leaf.tau_leaf.values[None, :],
        soil.values[None, :],
        arr[None, :],
        cfg,
    )
    return Spectrum(soil.grid, out[0])


# ---------------------------------------------------------------------------
# full forward model
# ---------------------------------------------------------------------------


def _soil_row_indices(selector: NDArray[np.float64], n_soils: int) -> NDArray[np.int64]:
    """Map the real-valued soil selector to library rows (round to nearest)."""
    idx = np.rint(selector).astype(np.int64)
    bad = (idx < 0) | (idx >= n_soils)
    if bad.any():
        entry = int(np.flatnonzero(bad)[0])
        raise ParameterError(
            f"soil_index {selector[entry]} at entry {entry} outside library of size {n_soils}"
        )
    return idx


def forward_batch(
    params: NDArray[np.float64],
    coeffs: CoefficientTable,
    soils: SoilLibrary,
    cfg: RtmConfig | None = None,
) -> NDArray[np.float64]:
    """Canopy reflectance spectra for an (N, 16) parameter block.

    Pure function of its inputs: the same block always yields bit-identical
    (N, n_samples) output, and each row equals the single-vector
    :func:`forward` of that row.
    """
    cfg = cfg or RtmConfig()
    P = np.asarray(params, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != N_PARAMETERS:
        raise ShapeError(f"expected (N, {N_PARAMETERS}) parameters, got {P.shape}")
    if coeffs.grid != soils.grid:
        raise ShapeError("coefficient table and soil library must share one grid")
    soil_rows = soils.values[_soil_row_indices(P[:, 12], len(soils))]
    rho_leaf, tau_leaf = leaf_optics_batch(P, coeffs)
    return _canopy_batch(rho_leaf, tau_leaf, soil_rows, P, cfg)


def forward(
    params: ParameterVector | NDArray[np.float64],
    coeffs: CoefficientTable,
    soils: SoilLibrary,
    cfg: RtmConfig | None = None,
) -> Spectrum:
    """Full parameter-vector-to-spectrum chain for one canopy realization."""
    arr = params.to_array() if isinstance(params, ParameterVector) else np.asarray(params)
    out = forward_batch(arr[None, :], coeffs, soils, cfg)
    return Spectrum(coeffs.grid, out[0])
