"""Pipeline configuration: flat key = value files plus CLI overrides.

The file format is deliberately minimal: one ``key = value`` per line,
``#`` comments and blank lines ignored, keys named exactly like
:class:`PipelineConfig` fields.  Values are coerced by the field's type;
booleans accept true/false/yes/no/1/0.  CLI flags override file values,
which override the defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .lut import ConstraintConfig, LhsConfig
from .inversion import InversionConfig
from .parameters import ParameterRanges, default_ranges
from .rtm import (
    RtmConfig,
    SoilLibrary,
    generate_reference_soils,
    load_soils,
)
from .spectral import BandSet, SpectralGrid, default_sensor_bands, load_band_set, make_grid

__all__ = ["PipelineConfig"]

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline in one flat, file-loadable record."""

    grid_start_nm: float = 400.0
    grid_end_nm: float = 2500.0
    grid_step_nm: float = 10.0
    band_set_path: str = ""
    lut_size: int = 50_000
    seed: int = 0
    max_refill_rounds: int = 20
    refill: bool = True
    coupling_enabled: bool = True
    coupling_intercept: float = 10.0
    coupling_slope: float = 15.0
    coupling_halfwidth: float = 40.0
    green_peak_enabled: bool = True
    green_window_low_nm: float = 500.0
    green_window_high_nm: float = 600.0
    green_threshold_nm: float = 547.0
    n_best: int = 10
    low_percentile: float = 0.05
    high_percentile: float = 0.95
    k_d: float = 1.0
    max_zenith_deg: float = 85.0
    region: str = "france"
    soil_path: str = ""
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    # -- loading / overriding ------------------------------------------------

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values: dict[str, Any] = {}
        types = {f.name: f.type for f in fields(cls)}
        defaults = cls()
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(value, getattr(defaults, key), f"{path}:{lineno}")
        return cls(**values)

    def override(self, **updates: Any) -> "PipelineConfig":
        """New config with the given non-None fields replaced."""
        filtered = {k: v for k, v in updates.items() if v is not None}
        unknown = set(filtered) - set(self.field_names())
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **filtered)

    # -- materialized sub-configurations ------------------------------------

    def grid(self) -> SpectralGrid:
        return make_grid(self.grid_start_nm, self.grid_end_nm, self.grid_step_nm)

    def band_set(self) -> BandSet:
        return load_band_set(self.band_set_path) if self.band_set_path else default_sensor_bands()

    def rtm_config(self) -> RtmConfig:
        return RtmConfig(k_d=self.k_d, max_zenith_deg=self.max_zenith_deg)

    def constraint_config(self) -> ConstraintConfig:
        return ConstraintConfig(
            coupling_enabled=self.coupling_enabled,
            coupling_intercept=self.coupling_intercept,
            coupling_slope=self.coupling_slope,
            coupling_halfwidth=self.coupling_halfwidth,
            green_peak_enabled=self.green_peak_enabled,
            green_window_nm=(self.green_window_low_nm, self.green_window_high_nm),
            green_threshold_nm=self.green_threshold_nm,
        )

    def inversion_config(self) -> InversionConfig:
        return InversionConfig(
            n_best=self.n_best,
            low_percentile=self.low_percentile,
            high_percentile=self.high_percentile,
        )

    def soils(self, grid: SpectralGrid) -> SoilLibrary:
        if self.soil_path:
            return load_soils(self.soil_path, grid)
        return generate_reference_soils(grid, [self.region])

    def soil_row(self, soils: SoilLibrary) -> int:
        """Library row selected by the configured region."""
        return soils.index(self.region)

    def ranges(self, soils: SoilLibrary) -> ParameterRanges:
        row = self.soil_row(soils)
        return default_ranges(row, row)

    def lhs_config(self, ranges: ParameterRanges) -> LhsConfig:
        return LhsConfig(
            target_size=self.lut_size,
            seed=self.seed,
            ranges=ranges,
            max_refill_rounds=self.max_refill_rounds,
        )


def _coerce(text: str, default: Any, where: str) -> Any:
    kind = type(default)
    if kind is bool:
        word = text.lower()
        if word in _TRUE_WORDS:
            return True
        if word in _FALSE_WORDS:
            return False
        raise ConfigError(f"{where}: expected a boolean, got {text!r}")
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {text!r}") from None
    return text
