"""Scikit-learn style estimator over the lookup-table inversion."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .config import PipelineConfig
from .errors import ShapeError
from .inversion import INVALID_TRAIT, InversionConfig, invert_matrix
from .lut import build_lut
from .parameters import N_PARAMETERS
from .rtm import generate_reference_coefficients

__all__ = ["LutTraitRetriever"]


class LutTraitRetriever(BaseEstimator):
    """Retrieve canopy traits from band reflectance via table search.

    ``fit`` builds the physics lookup table (no training data is consumed;
    ``X``/``y`` are accepted for API compatibility and ignored).  ``predict``
    returns the per-sample ensemble median trait vector; rows containing
    non-finite values yield sentinel traits. ``predict_interval`` adds the
    lower/upper percentile envelopes.

    Parameters mirror the pipeline config defaults but with a smaller table
    so that interactive fits stay cheap.
    """

    def __init__(
        self,
        lut_size: int = 5000,
        seed: int = 0,
        n_best: int = 10,
        low_percentile: float = 0.05,
        high_percentile: float = 0.95,
        region: str = "france",
        coupling_enabled: bool = True,
        green_peak_enabled: bool = True,
        refill: bool = True,
        workers: int = 1,
    ) -> None:
        self.lut_size = lut_size
        self.seed = seed
        self.n_best = n_best
        self.low_percentile = low_percentile
        self.high_percentile = high_percentile
        self.region = region
        self.coupling_enabled = coupling_enabled
        self.green_peak_enabled = green_peak_enabled
        self.refill = refill
        self.workers = workers

    def fit(self, X=None, y=None) -> "LutTraitRetriever":
        cfg = PipelineConfig(
            lut_size=self.lut_size,
            seed=self.seed,
            n_best=self.n_best,
            low_percentile=self.low_percentile,
            high_percentile=self.high_percentile,
            region=self.region,
            coupling_enabled=self.coupling_enabled,
            green_peak_enabled=self.green_peak_enabled,
            refill=self.refill,
            workers=self.workers,
        )
        grid = cfg.grid()
        self.coeffs_ = generate_reference_coefficients(grid)
        self.soils_ = cfg.soils(grid)
        self.band_set_ = cfg.band_set()
        ranges = cfg.ranges(self.soils_)
        self.lut_ = build_lut(
            cfg.lhs_config(ranges),
            cfg.constraint_config(),
            self.coeffs_,
            self.soils_,
            cfg.rtm_config(),
            self.band_set_,
            refill=cfg.refill,
        )
        self.n_features_in_ = len(self.band_set_)
        return self

    def _validated(self, X) -> np.ndarray:
        check_is_fitted(self, "lut_")
        X = check_array(X, dtype=np.float64, ensure_all_finite=False)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(
                f"X has {X.shape[1]} feature(s); the fitted table expects "
                f"{self.n_features_in_}"
            )
        return X

    def predict(self, X) -> np.ndarray:
        return self.predict_interval(X)[0]

    def predict_interval(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        X = self._validated(X)
        finite = np.isfinite(X).all(axis=1)
        n = X.shape[0]
        median = np.full((n, N_PARAMETERS), INVALID_TRAIT, dtype=np.float64)
        low = np.full((n, N_PARAMETERS), INVALID_TRAIT, dtype=np.float64)
        high = np.full((n, N_PARAMETERS), INVALID_TRAIT, dtype=np.float64)
        if finite.any():
            cfg = InversionConfig(
                n_best=self.n_best,
                low_percentile=self.low_percentile,
                high_percentile=self.high_percentile,
            )
            med, lo, hi, _costs, _idx = invert_matrix(
                X[finite], self.lut_, cfg, workers=self.workers
            )
            median[finite] = med
            low[finite] = lo
            high[finite] = hi
        return median, low, high
