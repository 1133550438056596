"""hsforge: synthetic hyperspectral scene generation and trait retrieval.

Forward canopy reflectance simulation, stratified lookup-table construction
with plausibility filtering, parallel per-pixel table inversion with
ensemble uncertainty, and tiled dataset emission.
"""

from .bundle import TILE_STEMS, BundleReport, TileBundle, validate_bundle, write_tile_bundle
from .config import PipelineConfig
from .errors import (
    BandCoverageError,
    ConfigError,
    ConsistencyError,
    ConstraintInfeasibleError,
    DomainError,
    GeometryError,
    GridError,
    HsforgeError,
    ParameterError,
    RasterFormatError,
    ShapeError,
    TableFormatError,
)
from .estimator import LutTraitRetriever
from .inversion import (
    INVALID_TRAIT,
    InversionConfig,
    PixelResult,
    TraitMaps,
    ensemble_stats,
    invert_image,
    invert_matrix,
    invert_pixel,
    n_best,
    percentile,
    rmse,
    simulate_from_traits,
)
from .kernels import accumulator_to_cost, max_threads, topk_search, topk_search_reference
from .lut import (
    ConstraintConfig,
    LhsConfig,
    LookupTable,
    build_lut,
    cab_lai_accept,
    constraint_violations,
    green_peak_accept,
    lhs_sample,
    load_lut,
    save_lut,
)
from .parameters import (
    N_PARAMETERS,
    PARAMETER_NAMES,
    ParameterRanges,
    ParameterVector,
    default_ranges,
)
from .raster import RasterCube, crop_patches, nn_upsample_2x, read_raster, write_raster
from .rtm import (
    REGION_SOIL_COEFFS,
    CoefficientTable,
    LeafOptics,
    RtmConfig,
    SoilLibrary,
    canopy_reflectance,
    forward,
    forward_batch,
    g_function,
    generate_reference_coefficients,
    generate_reference_soils,
    leaf_optics,
    leaf_optics_batch,
    load_coefficients,
    load_soils,
    save_coefficients,
    save_soils,
)
from .spectral import (
    DEFAULT_BANDS,
    BandSet,
    SensorBand,
    SpectralGrid,
    Spectrum,
    band_average,
    band_average_matrix,
    canonical_grid,
    default_sensor_bands,
    load_band_set,
    make_grid,
    save_band_set,
)
from .synth import SyntheticSceneSpec, generate_scene_inputs, synthesize_tile, tile_id

__version__ = "0.1.0"

__all__ = [
    "BandCoverageError",
    "BandSet",
    "BundleReport",
    "CoefficientTable",
    "ConfigError",
    "ConsistencyError",
    "ConstraintConfig",
    "ConstraintInfeasibleError",
    "DEFAULT_BANDS",
    "DomainError",
    "GeometryError",
    "GridError",
    "HsforgeError",
    "INVALID_TRAIT",
    "InversionConfig",
    "LeafOptics",
    "LhsConfig",
    "LookupTable",
    "LutTraitRetriever",
    "N_PARAMETERS",
    "PARAMETER_NAMES",
    "ParameterError",
    "ParameterRanges",
    "ParameterVector",
    "PipelineConfig",
    "PixelResult",
    "REGION_SOIL_COEFFS",
    "RasterCube",
    "RasterFormatError",
    "RtmConfig",
    "SensorBand",
    "ShapeError",
    "SoilLibrary",
    "SpectralGrid",
    "Spectrum",
    "SyntheticSceneSpec",
    "TILE_STEMS",
    "TableFormatError",
    "TileBundle",
    "TraitMaps",
    "accumulator_to_cost",
    "band_average",
    "band_average_matrix",
    "build_lut",
    "cab_lai_accept",
    "canonical_grid",
    "canopy_reflectance",
    "constraint_violations",
    "crop_patches",
    "default_ranges",
    "default_sensor_bands",
    "ensemble_stats",
    "forward",
    "forward_batch",
    "g_function",
    "generate_reference_coefficients",
    "generate_reference_soils",
    "generate_scene_inputs",
    "green_peak_accept",
    "invert_image",
    "invert_matrix",
    "invert_pixel",
    "leaf_optics",
    "leaf_optics_batch",
    "lhs_sample",
    "load_band_set",
    "load_coefficients",
    "load_lut",
    "load_soils",
    "make_grid",
    "max_threads",
    "n_best",
    "nn_upsample_2x",
    "percentile",
    "read_raster",
    "rmse",
    "save_band_set",
    "save_coefficients",
    "save_lut",
    "save_soils",
    "simulate_from_traits",
    "synthesize_tile",
    "tile_id",
    "topk_search",
    "topk_search_reference",
    "validate_bundle",
    "write_raster",
    "write_tile_bundle",
]
