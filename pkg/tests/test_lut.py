import numpy as np
import pytest

import hsforge as hf
from hsforge import (
    ConfigError,
    ConstraintConfig,
    ConstraintInfeasibleError,
    GridError,
    LhsConfig,
    Spectrum,
    TableFormatError,
)
from hsforge.parameters import PARAMETER_NAMES


# ---------------------------------------------------------------------------
# stratified sampling
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("m", [1, 7, 32])
def test_lhs_one_sample_per_stratum(m, ranges):
    samples = hf.lhs_sample(ranges, m, seed=42)
    assert samples.shape == (m, 16)
    degenerate = ranges.degenerate_mask()
    for d in range(16):
        lo, hi = ranges.minima[d], ranges.maxima[d]
        if degenerate[d]:
            assert np.all(samples[:, d] == lo)
            continue
        strata = np.floor((samples[:, d] - lo) / (hi - lo) * m).astype(int)
        assert sorted(strata) == list(range(m)), PARAMETER_NAMES[d]


def test_lhs_stays_inside_open_strata(ranges):
    samples = hf.lhs_sample(ranges, 64, seed=3)
    degenerate = ranges.degenerate_mask()
    for d in np.flatnonzero(~degenerate):
        assert np.all(samples[:, d] > ranges.minima[d])
        assert np.all(samples[:, d] < ranges.maxima[d])


def test_lhs_deterministic(ranges):
    a = hf.lhs_sample(ranges, 50, seed=9)
    b = hf.lhs_sample(ranges, 50, seed=9)
    c = hf.lhs_sample(ranges, 50, seed=10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_lhs_degenerate_dims_do_not_consume_randomness(ranges):
    # collapsing a non-degenerate trait must not perturb other columns'
    # draws: degenerate dims skip the stream entirely
    collapsed = ranges.replace("cw", 0.03, 0.03)
    a = hf.lhs_sample(ranges, 40, seed=5)
    b = hf.lhs_sample(collapsed, 40, seed=5)
    cw = PARAMETER_NAMES.index("cw")
    cm = PARAMETER_NAMES.index("cm")
    assert np.all(b[:, cw] == 0.03)
    # columns drawn before cw are identical; the next sampled column (cm)
    # now consumes cw's former draws, so it must differ
    assert np.array_equal(a[:, :cw], b[:, :cw])
    assert not np.array_equal(a[:, cm], b[:, cm])


def test_lhs_rejects_bad_size(ranges):
    with pytest.raises(ConfigError):
        hf.lhs_sample(ranges, 0, seed=1)


# ---------------------------------------------------------------------------
# plausibility filters
# ---------------------------------------------------------------------------

def _params_with(cab, lai):
    vec = np.array([1.5, cab, 10.0, 1.0, 0.1, 0.02, 0.009, lai, 57.0, 0.0, 1.0,
                    0.1, 0.0, 30.0, 10.0, 120.0])
    return vec


def test_chlorophyll_lai_envelope_boundaries():
    cfg = ConstraintConfig()
    # envelope center 10 + 15*lai, halfwidth 40, boundary inclusive
    assert hf.cab_lai_accept(_params_with(10.0 + 15.0 * 2.0 + 40.0, 2.0), cfg)
    assert hf.cab_lai_accept(_params_with(10.0 + 15.0 * 2.0 - 40.0, 2.0), cfg)
    assert not hf.cab_lai_accept(_params_with(10.0 + 15.0 * 2.0 + 40.0 + 1e-9, 2.0), cfg)
    assert not hf.cab_lai_accept(_params_with(10.0 + 15.0 * 2.0 - 40.0 - 1e-9, 2.0), cfg)
    assert hf.cab_lai_accept(_params_with(0.0, 0.0), cfg)  # center 10, |0-10| <= 40


def test_coupling_disabled_accepts_everything():
    cfg = ConstraintConfig(coupling_enabled=False)
    assert hf.cab_lai_accept(_params_with(160.0, 0.0), cfg)


def _bump_spectrum(grid, center_nm, amplitude=0.3, width_nm=15.0):
    wl = grid.wavelengths
    base = 0.05 + 0.00001 * (wl - 400.0)
    return Spectrum(grid, base + amplitude * np.exp(-((wl - center_nm) ** 2) / (2 * width_nm**2)))


def test_green_peak_filter_threshold(grid):
    cfg = ConstraintConfig()
    assert not hf.green_peak_accept(_bump_spectrum(grid, 530.0), cfg)
    assert hf.green_peak_accept(_bump_spectrum(grid, 550.0), cfg)
    # threshold wavelength itself is accepted
    assert hf.green_peak_accept(_bump_spectrum(grid, 547.0), cfg)


def test_green_peak_tie_takes_largest_wavelength(grid):
    cfg = ConstraintConfig()
    # flat plateau across the window: every sample ties, the largest
    # wavelength (600 nm >= 547) wins, so the spectrum is accepted
    flat = Spectrum(grid, np.full(grid.count, 0.2))
    assert hf.green_peak_accept(flat, cfg)

    # two exactly equal peaks at 520 and 540 -> tie resolves to 540 < 547
    wl = grid.wavelengths
    values = np.full(grid.count, 0.1)
    values[wl == 520.0] = 0.5
    values[wl == 540.0] = 0.5
    assert not hf.green_peak_accept(Spectrum(grid, values), cfg)


def test_green_peak_disabled(grid):
    cfg = ConstraintConfig(green_peak_enabled=False)
    assert hf.green_peak_accept(_bump_spectrum(grid, 510.0), cfg)


def test_green_window_must_intersect_grid():
    sparse = hf.make_grid(1000.0, 2000.0, 100.0)
    coeffs = hf.generate_reference_coefficients(sparse)
    soils = hf.generate_reference_soils(sparse, ["france"])
    cfg = LhsConfig(target_size=10, seed=0, ranges=hf.default_ranges(0, 0))
    with pytest.raises(ConfigError, match="green"):
        hf.build_lut(cfg, ConstraintConfig(), coeffs, soils)


def test_constraint_config_validation():
    with pytest.raises(ConfigError):
        ConstraintConfig(coupling_halfwidth=0.0)
    with pytest.raises(ConfigError):
        ConstraintConfig(green_window_nm=(600.0, 500.0))


# ---------------------------------------------------------------------------
# table construction
# ---------------------------------------------------------------------------

def test_build_is_deterministic(coeffs, france_soils, single_soil_ranges):
    cfg = LhsConfig(target_size=300, seed=21, ranges=single_soil_ranges)
    a = hf.build_lut(cfg, ConstraintConfig(), coeffs, france_soils)
    b = hf.build_lut(cfg, ConstraintConfig(), coeffs, france_soils)
    assert np.array_equal(a.params, b.params)
    assert np.array_equal(a.spectra, b.spectra)
    assert np.array_equal(a.band_values, b.band_values)
    assert a.config_digest == b.config_digest


def test_digest_tracks_configuration(coeffs, france_soils, single_soil_ranges):
    base = LhsConfig(target_size=300, seed=21, ranges=single_soil_ranges)
    lut = hf.build_lut(base, ConstraintConfig(), coeffs, france_soils)
    other_seed = hf.build_lut(
        LhsConfig(target_size=300, seed=22, ranges=single_soil_ranges),
        ConstraintConfig(), coeffs, france_soils,
    )
    other_constraint = hf.build_lut(
        base, ConstraintConfig(coupling_halfwidth=50.0), coeffs, france_soils
    )
    assert len(lut.config_digest) == 32
    assert lut.config_digest != other_seed.config_digest
    assert lut.config_digest != other_constraint.config_digest


def test_built_table_satisfies_filters(lut_small):
    counts = hf.constraint_violations(lut_small, ConstraintConfig())
    assert counts == {"coupling": 0, "green_peak": 0}


def test_built_table_obeys_the_envelope_directly(lut_small):
    cab = lut_small.params[:, PARAMETER_NAMES.index("cab")]
    lai = lut_small.params[:, PARAMETER_NAMES.index("lai")]
    assert np.all(np.abs(cab - (10.0 + 15.0 * lai)) <= 40.0)


def test_unfiltered_build_contains_violations(coeffs, france_soils, single_soil_ranges):
    cfg = LhsConfig(target_size=400, seed=33, ranges=single_soil_ranges)
    off = ConstraintConfig(coupling_enabled=False, green_peak_enabled=False)
    lut = hf.build_lut(cfg, off, coeffs, france_soils)
    assert len(lut) == 400
    counts = hf.constraint_violations(lut, ConstraintConfig())
    assert counts["coupling"] > 0


def test_refill_reaches_target_and_no_refill_stops_short(coeffs, france_soils, single_soil_ranges):
    cfg = LhsConfig(target_size=400, seed=44, ranges=single_soil_ranges)
    filled = hf.build_lut(cfg, ConstraintConfig(), coeffs, france_soils, refill=True)
    assert len(filled) == 400
    single_round = hf.build_lut(cfg, ConstraintConfig(), coeffs, france_soils, refill=False)
    # one 400-draw round keeps only the survivors (~40-50% acceptance)
    assert 0 < len(single_round) < 400
    # the surviving rows are exactly the refill build's first rows
    assert np.array_equal(single_round.params, filled.params[: len(single_round)])


def test_infeasible_constraints_raise_with_rate(coeffs, france_soils, single_soil_ranges):
    cfg = LhsConfig(target_size=50, seed=1, ranges=single_soil_ranges, max_refill_rounds=2)
    tight = ConstraintConfig(coupling_halfwidth=1e-6)
    with pytest.raises(ConstraintInfeasibleError) as err:
        hf.build_lut(cfg, tight, coeffs, france_soils)
    assert err.value.acceptance_rate < 0.01


def test_entry_accessor(lut_small):
    vec, spectrum, bands = lut_small.entry(3)
    assert vec.to_array().tolist() == lut_small.params[3].tolist()
    assert np.array_equal(spectrum.values, lut_small.spectra[3].astype(np.float64))
    assert np.array_equal(bands, lut_small.band_values[3])


def test_band_values_match_spectra_reduction(lut_small, grid, band_set):
    want = hf.band_average_matrix(lut_small.spectra, grid, band_set).astype(np.float32)
    assert np.array_equal(lut_small.band_values, want)


def test_table_arrays_are_read_only(lut_small):
    with pytest.raises(ValueError):
        lut_small.params[0, 0] = 0.0
    with pytest.raises(ValueError):
        lut_small.band_values[0, 0] = 0.0


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_save_load_roundtrip(tmp_path, lut_small, grid):
    path = tmp_path / "table.lut"
    hf.save_lut(lut_small, path)
    back = hf.load_lut(path, grid)
    assert len(back) == len(lut_small)
    assert np.array_equal(back.params, lut_small.params)
    assert np.array_equal(back.spectra, lut_small.spectra)
    assert np.array_equal(back.band_values, lut_small.band_values)
    assert back.seed == lut_small.seed
    assert back.config_digest == lut_small.config_digest
    assert back.band_set.names == lut_small.band_set.names
    assert back.grid == grid


def test_load_without_grid_uses_stored_geometry(tmp_path, lut_small):
    path = tmp_path / "table.lut"
    hf.save_lut(lut_small, path)
    back = hf.load_lut(path)
    assert back.grid == lut_small.grid


def test_load_rejects_grid_mismatch(tmp_path, lut_small):
    path = tmp_path / "table.lut"
    hf.save_lut(lut_small, path)
    with pytest.raises(GridError):
        hf.load_lut(path, hf.make_grid(400, 2490, 10))


def test_load_rejects_wrong_magic(tmp_path, lut_small):
    path = tmp_path / "table.lut"
    hf.save_lut(lut_small, path)
    raw = bytearray(path.read_bytes())
    raw[:2] = b"XX"
    path.write_bytes(bytes(raw))
    with pytest.raises(TableFormatError, match="magic"):
        hf.load_lut(path)


def test_load_rejects_corruption(tmp_path, lut_small):
    path = tmp_path / "table.lut"
    hf.save_lut(lut_small, path)
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(TableFormatError, match="checksum"):
        hf.load_lut(path)


def test_load_rejects_truncation(tmp_path, lut_small):
    path = tmp_path / "table.lut"
    hf.save_lut(lut_small, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-10])
    with pytest.raises(TableFormatError):
        hf.load_lut(path)


def test_rebind_band_set(lut_small, band_set):
    rebound = lut_small.rebind_band_set(band_set)
    assert rebound.band_set is band_set
    assert np.array_equal(rebound.band_values, lut_small.band_values)
    wrong = hf.BandSet([hf.SensorBand("other", 500.0, 10.0)])
    with pytest.raises(ConfigError):
        lut_small.rebind_band_set(wrong)
