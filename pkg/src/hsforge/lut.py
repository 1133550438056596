"""Lookup-table construction: stratified sampling, plausibility filters,
forward simulation, and binary persistence.

Sampling is Latin Hypercube: for table size M, each non-degenerate
parameter dimension is split into M equal strata and receives exactly one
sample per stratum, placed uniformly inside it via an independent seeded
permutation.  Candidates then pass two optional plausibility filters — a
chlorophyll/leaf-area coupling envelope on the parameters and a green-peak
position test on the simulated spectrum — and accepted entries carry their
full-grid spectrum (stored float32) plus its sensor-band averages.

By default rejected candidates are replaced by fresh sampling rounds with
seeds derived from (seed, round), so the finished table has exactly the
requested size; a remove-only mode keeps just the survivors of a single
round.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import (
    ConfigError,
    ConstraintInfeasibleError,
    GridError,
    ShapeError,
    TableFormatError,
)
from .parameters import N_PARAMETERS, ParameterRanges, ParameterVector, default_ranges
from .rtm import CoefficientTable, RtmConfig, SoilLibrary, forward_batch
from .spectral import (
    BandSet,
    SensorBand,
    SpectralGrid,
    Spectrum,
    band_average_matrix,
    default_sensor_bands,
)

__all__ = [
    "LhsConfig",
    "ConstraintConfig",
    "LookupTable",
    "lhs_sample",
    "cab_lai_accept",
    "green_peak_accept",
    "build_lut",
    "save_lut",
    "load_lut",
    "constraint_violations",
]

_MAGIC = b"HSLUT\0"
_VERSION = 1

# Uniform stratum offsets are kept this far away from 0 so a sample can
# never round onto the stratum edge it is meant to stay strictly inside.
_OPEN_INTERVAL_FLOOR = 1e-9


@dataclass(frozen=True)
class LhsConfig:
    """Latin Hypercube sampling setup for the table build."""

    target_size: int = 50_000
    seed: int = 0
    ranges: ParameterRanges = field(default_factory=default_ranges)
    max_refill_rounds: int = 20

    def __post_init__(self) -> None:
        if self.target_size < 1:
            raise ConfigError(f"target_size must be >= 1, got {self.target_size}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit an unsigned 64-bit integer")
        if self.max_refill_rounds < 1:
            raise ConfigError(f"max_refill_rounds must be >= 1, got {self.max_refill_rounds}")


@dataclass(frozen=True)
class ConstraintConfig:
    """Plausibility filters applied to lookup-table candidates.

    The coupling filter keeps a candidate when its chlorophyll content lies
    within ``coupling_halfwidth`` of the line ``intercept + slope * lai``
    (boundary inclusive).  The green-peak filter locates the maximum of the
    simulated spectrum inside ``green_window_nm`` (ties resolved toward the
    largest wavelength) and keeps the candidate when that peak sits at or
    above ``green_threshold_nm``.
    """

    coupling_enabled: bool = True
    coupling_intercept: float = 10.0
    coupling_slope: float = 15.0
    coupling_halfwidth: float = 40.0
    green_peak_enabled: bool = True
    green_window_nm: tuple[float, float] = (500.0, 600.0)
    green_threshold_nm: float = 547.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.coupling_halfwidth) or self.coupling_halfwidth <= 0:
            raise ConfigError(
                f"coupling_halfwidth must be positive, got {self.coupling_halfwidth}"
            )
        lo, hi = self.green_window_nm
        if not lo < hi:
            raise ConfigError(f"green window must satisfy low < high, got {self.green_window_nm}")


def _lhs_sample_from_seq(
    ranges: ParameterRanges, m: int, seed_seq: np.random.SeedSequence
) -> NDArray[np.float64]:
    rng = np.random.default_rng(seed_seq)
    lo, hi = ranges.minima, ranges.maxima
    degenerate = ranges.degenerate_mask()
    out = np.empty((m, N_PARAMETERS), dtype=np.float64)
    for j in range(N_PARAMETERS):
        if degenerate[j]:
            out[:, j] = lo[j]
            continue
        strata = rng.permutation(m) + 1
        offsets = np.maximum(rng.random(m), _OPEN_INTERVAL_FLOOR)
        out[:, j] = lo[j] + (strata - offsets) / m * (hi[j] - lo[j])
    return out


def lhs_sample(ranges: ParameterRanges, m: int, seed: int) -> NDArray[np.float64]:
    """Draw an (m, 16) Latin Hypercube sample of the parameter ranges.

    For each non-degenerate dimension, stratum k (1-based, via a seeded
    permutation) contributes ``min + (k - u)/m * span`` with ``u`` uniform
    on the open interval (0, 1), so exactly one sample lands strictly
    inside each of the m equal strata.  Degenerate dimensions emit their
    fixed value and consume no randomness.  Deterministic per seed.
    """
    if m < 1:
        raise ConfigError(f"sample count must be >= 1, got {m}")
    return _lhs_sample_from_seq(ranges, m, np.random.SeedSequence(seed))


def _coupling_mask(params: NDArray[np.float64], constraints: ConstraintConfig) -> NDArray[np.bool_]:
    if not constraints.coupling_enabled:
        return np.ones(params.shape[0], dtype=bool)
    cab = params[:, 1]
    lai = params[:, 7]
    center = constraints.coupling_intercept + constraints.coupling_slope * lai
    return np.abs(cab - center) <= constraints.coupling_halfwidth


def cab_lai_accept(
    params: ParameterVector | NDArray[np.float64], constraints: ConstraintConfig
) -> bool:
    """True when the chlorophyll/leaf-area coupling envelope accepts ``params``."""
    arr = params.to_array() if isinstance(params, ParameterVector) else np.asarray(params, dtype=np.float64)
    if arr.shape != (N_PARAMETERS,):
        raise ShapeError(f"expected a 16-entry parameter vector, got shape {arr.shape}")
    return bool(_coupling_mask(arr[None, :], constraints)[0])


def _green_window_columns(grid: SpectralGrid, constraints: ConstraintConfig) -> NDArray[np.int64]:
    lo, hi = constraints.green_window_nm
    cols = np.flatnonzero((grid.wavelengths >= lo) & (grid.wavelengths <= hi))
    if cols.size == 0:
        raise ConfigError(
            f"green window {constraints.green_window_nm} covers no sample of the grid"
        )
    return cols


def _green_peak_mask(
    spectra: NDArray[np.floating], grid: SpectralGrid, constraints: ConstraintConfig
) -> NDArray[np.bool_]:
    if not constraints.green_peak_enabled:
        return np.ones(spectra.shape[0], dtype=bool)
    cols = _green_window_columns(grid, constraints)
    window = spectra[:, cols]
    # argmax returns the first maximum; scanning the reversed window makes
    # ties resolve toward the largest wavelength instead.
    reversed_peak = np.argmax(window[:, ::-1], axis=1)
    peak_col = (window.shape[1] - 1) - reversed_peak
    peak_nm = grid.wavelengths[cols[peak_col]]
    return peak_nm >= constraints.green_threshold_nm


def green_peak_accept(spectrum: Spectrum, constraints: ConstraintConfig) -> bool:
    """True when the green-peak position test accepts ``spectrum``."""
    return bool(_green_peak_mask(spectrum.values[None, :], spectrum.grid, constraints)[0])


class LookupTable:
    """M accepted entries: parameters, full spectra, and band averages.

    ``params`` is (M, 16) float64; ``spectra`` is (M, n_samples) float32
    (the stored representation every downstream comparison uses);
    ``band_values`` is (M, n_bands) float32, the float64 band averages of
    the stored spectra rounded once to float32.
    """

    def __init__(
        self,
        params: NDArray[np.float64],
        spectra: NDArray[np.float32],
        band_values: NDArray[np.float32],
        band_set: BandSet,
        grid: SpectralGrid,
        seed: int,
        config_digest: bytes,
    ):
        params = np.ascontiguousarray(params, dtype=np.float64)
        spectra = np.ascontiguousarray(spectra, dtype=np.float32)
        band_values = np.ascontiguousarray(band_values, dtype=np.float32)
        if params.ndim != 2 or params.shape[1] != N_PARAMETERS:
            raise ShapeError(f"params must be (M, {N_PARAMETERS}), got {params.shape}")
        m = params.shape[0]
        if m < 1:
            raise ShapeError("a lookup table needs at least one entry")
        if spectra.shape != (m, grid.count):
            raise ShapeError(
                f"spectra must be ({m}, {grid.count}), got {spectra.shape}"
            )
        if band_values.shape != (m, len(band_set)):
            raise ShapeError(
                f"band_values must be ({m}, {len(band_set)}), got {band_values.shape}"
            )
        if len(config_digest) != 32:
            raise ConfigError("config digest must be 32 bytes")
        for arr in (params, spectra, band_values):
            arr.flags.writeable = False
        self._params = params
        self._spectra = spectra
        self._band_values = band_values
        self._band_set = band_set
        self._grid = grid
        self._seed = int(seed)
        self._digest = bytes(config_digest)

    def __len__(self) -> int:
        return self._params.shape[0]

    @property
    def params(self) -> NDArray[np.float64]:
        return self._params

    @property
    def spectra(self) -> NDArray[np.float32]:
        return self._spectra

    @property
    def band_values(self) -> NDArray[np.float32]:
        return self._band_values

    @cached_property
    def band_values_f64(self) -> NDArray[np.float64]:
        """Float64 promotion of the stored band values (search-kernel input)."""
        promoted = self._band_values.astype(np.float64)
        promoted.flags.writeable = False
        return promoted

    @property
    def band_set(self) -> BandSet:
        return self._band_set

    @property
    def grid(self) -> SpectralGrid:
        return self._grid

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def config_digest(self) -> bytes:
        return self._digest

    def entry(self, i: int) -> tuple[ParameterVector, Spectrum, NDArray[np.float32]]:
        if not 0 <= i < len(self):
            raise ConfigError(f"entry index {i} outside 0..{len(self) - 1}")
        return (
            ParameterVector.from_array(self._params[i]),
            Spectrum(self._grid, self._spectra[i].astype(np.float64)),
            self._band_values[i],
        )

    def rebind_band_set(self, band_set: BandSet) -> "LookupTable":
        """Attach real band geometry to a table whose file only stored names.

        The replacement must carry exactly the stored band names in order.
        """
        if band_set.names != self._band_set.names:
            raise ConfigError(
                f"band names {band_set.names} do not match the table's "
                f"{self._band_set.names}"
            )
        return LookupTable(
            self._params,
            self._spectra,
            self._band_values,
            band_set,
            self._grid,
            self._seed,
            self._digest,
        )


def _config_digest(
    lhs_cfg: LhsConfig,
    constraints: ConstraintConfig,
    coeffs: CoefficientTable,
    soils: SoilLibrary,
    rtm_cfg: RtmConfig,
    band_set: BandSet,
    refill: bool,
) -> bytes:
    content = hashlib.sha256()
    for column in ("k_ab", "k_ar", "k_ant", "k_brown", "k_w", "k_m", "r_if"):
        content.update(getattr(coeffs, column).tobytes())
    content.update(soils.values.tobytes())
    payload = {
        "target_size": lhs_cfg.target_size,
        "seed": lhs_cfg.seed,
        "max_refill_rounds": lhs_cfg.max_refill_rounds,
        "refill": refill,
        "ranges_min": [repr(v) for v in lhs_cfg.ranges.minima.tolist()],
        "ranges_max": [repr(v) for v in lhs_cfg.ranges.maxima.tolist()],
        "coupling": [
            constraints.coupling_enabled,
            repr(constraints.coupling_intercept),
            repr(constraints.coupling_slope),
            repr(constraints.coupling_halfwidth),
        ],
        "green": [
            constraints.green_peak_enabled,
            repr(constraints.green_window_nm[0]),
            repr(constraints.green_window_nm[1]),
            repr(constraints.green_threshold_nm),
        ],
        "rtm": [repr(rtm_cfg.k_d), repr(rtm_cfg.max_zenith_deg)],
        "grid": [repr(coeffs.grid.start_nm), repr(coeffs.grid.step_nm), coeffs.grid.count],
        "bands": [[b.name, repr(b.center_nm), repr(b.width_nm)] for b in band_set],
        "tables_sha256": content.hexdigest(),
        "soil_names": list(soils.names),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).digest()


def build_lut(
    lhs_cfg: LhsConfig,
    constraints: ConstraintConfig,
    coeffs: CoefficientTable,
    soils: SoilLibrary,
    rtm_cfg: RtmConfig | None = None,
    band_set: BandSet | None = None,
    refill: bool = True,
) -> LookupTable:
    """Sample, filter, simulate, and assemble a lookup table.

    With ``refill`` (the default), sampling rounds repeat — each a fresh
    Latin Hypercube with a seed derived from (seed, round) — until exactly
    ``target_size`` accepted entries exist; exceeding ``max_refill_rounds``
    raises, reporting the observed acceptance rate.  With ``refill=False``
    only the survivors of the first round are kept, so the table may be
    smaller than the target.
    """
    rtm_cfg = rtm_cfg or RtmConfig()
    band_set = band_set or default_sensor_bands()
    grid = coeffs.grid
    if constraints.green_peak_enabled:
        _green_window_columns(grid, constraints)  # fail before simulating
    target = lhs_cfg.target_size

    kept_params: list[NDArray[np.float64]] = []
    kept_spectra: list[NDArray[np.float32]] = []
    accepted = 0
    sampled = 0
    for round_id in range(lhs_cfg.max_refill_rounds):
        seq = (
            np.random.SeedSequence(lhs_cfg.seed)
            if round_id == 0
            else np.random.SeedSequence((lhs_cfg.seed, round_id))
        )
        candidates = _lhs_sample_from_seq(lhs_cfg.ranges, target, seq)
        sampled += target
        candidates = candidates[_coupling_mask(candidates, constraints)]
        if candidates.shape[0]:
            # Spectra are stored (and compared downstream) as float32, so the
            # spectral filter runs on the float32 values too.
            spectra = forward_batch(candidates, coeffs, soils, rtm_cfg).astype(np.float32)
            green = _green_peak_mask(spectra, grid, constraints)
            candidates, spectra = candidates[green], spectra[green]
            if candidates.shape[0]:
                kept_params.append(candidates)
                kept_spectra.append(spectra)
                accepted += candidates.shape[0]
        if not refill or accepted >= target:
            break
    if accepted == 0 or (refill and accepted < target):
        rate = accepted / sampled if sampled else 0.0
        raise ConstraintInfeasibleError(
            f"accepted {accepted} of {sampled} candidates "
            f"(rate {rate:.4f}); cannot reach target {target} "
            f"within {lhs_cfg.max_refill_rounds} round(s)",
            acceptance_rate=rate,
        )

    params = np.concatenate(kept_params, axis=0)
    spectra = np.concatenate(kept_spectra, axis=0)
    if refill:
        params, spectra = params[:target], spectra[:target]
    band_values = band_average_matrix(spectra, grid, band_set).astype(np.float32)
    digest = _config_digest(lhs_cfg, constraints, coeffs, soils, rtm_cfg, band_set, refill)
    return LookupTable(params, spectra, band_values, band_set, grid, lhs_cfg.seed, digest)


def constraint_violations(lut: LookupTable, constraints: ConstraintConfig) -> dict[str, int]:
    """Full-table scan: how many stored entries violate each enabled filter."""
    coupling_bad = int(np.count_nonzero(~_coupling_mask(lut.params, constraints)))
    green_bad = int(np.count_nonzero(~_green_peak_mask(lut.spectra, lut.grid, constraints)))
    return {
        "coupling": coupling_bad if constraints.coupling_enabled else 0,
        "green_peak": green_bad if constraints.green_peak_enabled else 0,
    }


# ---------------------------------------------------------------------------
# binary persistence
# ---------------------------------------------------------------------------
#
# Little-endian layout:
#   magic "HSLUT\0" | version u16 | M u64 | grid start f64 | grid step f64 |
#   grid count u32 | band count u32 | per band: name length u16 + UTF-8 name |
#   seed u64 | config digest (32 bytes) |
#   M records of [16 x f64 params][count x f32 spectrum][bands x f32 values] |
#   CRC32 (u32) of all preceding bytes.


def _record_dtype(grid_count: int, band_count: int) -> np.dtype:
    return np.dtype(
        [
            ("params", "<f8", (N_PARAMETERS,)),
            ("spectrum", "<f4", (grid_count,)),
            ("bands", "<f4", (band_count,)),
        ]
    )


def save_lut(lut: LookupTable, path: str | Path) -> None:
    """Serialize a lookup table; the round trip is bit-exact."""
    header = bytearray()
    header += _MAGIC
    header += struct.pack("<H", _VERSION)
    header += struct.pack(
        "<QddII",
        len(lut),
        lut.grid.start_nm,
        lut.grid.step_nm,
        lut.grid.count,
        len(lut.band_set),
    )
    for name in lut.band_set.names:
        encoded = name.encode("utf-8")
        header += struct.pack("<H", len(encoded)) + encoded
    header += struct.pack("<Q", lut.seed)
    header += lut.config_digest

    records = np.empty(len(lut), dtype=_record_dtype(lut.grid.count, len(lut.band_set)))
    records["params"] = lut.params
    records["spectrum"] = lut.spectra
    records["bands"] = lut.band_values

    body = bytes(header) + records.tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def load_lut(path: str | Path, grid: SpectralGrid | None = None) -> LookupTable:
    """Read a serialized lookup table, verifying structure and checksum.

    When ``grid`` is given, the stored grid must match it exactly;
    otherwise the stored grid is adopted.
    """
    path = Path(path)
    if not path.is_file():
        raise TableFormatError(f"lookup table file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < len(_MAGIC) + 2:
        raise TableFormatError(f"{path}: truncated header")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise TableFormatError(f"{path}: bad magic, not a lookup table file")
    (version,) = struct.unpack_from("<H", blob, len(_MAGIC))
    if version != _VERSION:
        raise TableFormatError(f"{path}: unsupported version {version}")
    if len(blob) < 4:
        raise TableFormatError(f"{path}: missing checksum")
    body, crc_stored = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise TableFormatError(f"{path}: checksum mismatch, file is corrupt")

    offset = len(_MAGIC) + 2
    try:
        m, start_nm, step_nm, grid_count, band_count = struct.unpack_from("<QddII", body, offset)
        offset += struct.calcsize("<QddII")
        names = []
        for _ in range(band_count):
            (name_len,) = struct.unpack_from("<H", body, offset)
            offset += 2
            names.append(body[offset : offset + name_len].decode("utf-8"))
            offset += name_len
        (seed,) = struct.unpack_from("<Q", body, offset)
        offset += 8
        digest = body[offset : offset + 32]
        if len(digest) != 32:
            raise TableFormatError(f"{path}: truncated config digest")
        offset += 32
    except struct.error:
        raise TableFormatError(f"{path}: truncated header") from None

    stored_grid = SpectralGrid(start_nm, step_nm, grid_count)
    if grid is not None and stored_grid != grid:
        raise GridError(
            f"{path}: stored grid ({start_nm}, {step_nm}, {grid_count}) "
            f"does not match the working grid "
            f"({grid.start_nm}, {grid.step_nm}, {grid.count})"
        )
    # Band geometry is not serialized; the stored names bind the table to
    # its band axis, and centers/widths come back as placeholders until the
    # caller re-binds real geometry via rebind_band_set().
    dtype = _record_dtype(grid_count, band_count)
    expected = m * dtype.itemsize
    payload = body[offset:]
    if len(payload) != expected:
        raise TableFormatError(
            f"{path}: payload holds {len(payload)} bytes but header implies {expected}"
        )
    records = np.frombuffer(payload, dtype=dtype)
    band_set = BandSet([SensorBand(n, 1.0, 1.0) for n in names])
    return LookupTable(
        records["params"].copy(),
        records["spectrum"].copy(),
        records["bands"].copy(),
        band_set,
        stored_grid,
        seed,
        digest,
    )
