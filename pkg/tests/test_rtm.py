import math

import numpy as np
import pytest

import hsforge as hf
from hsforge import (
    ConfigError,
    GeometryError,
    GridError,
    ParameterError,
    ParameterVector,
    ShapeError,
    Spectrum,
    TableFormatError,
)
from hsforge.rtm import REGION_SOIL_COEFFS, add_layers, single_plate


def _vector(**overrides):
    base = dict(
        n_struct=1.5, cab=40.0, car=10.0, cant=1.0, cbrown=0.1, cw=0.02, cm=0.009,
        lai=3.0, lidfa=57.0, lidfb=0.0, type_lidf=1.0, hspot=0.1, soil_index=0.0,
        theta_s=30.0, theta_v=10.0, phi_rel=120.0,
    )
    base.update(overrides)
    return ParameterVector(**base)


_ZERO_CONTENT = dict(cab=0.0, car=0.0, cant=0.0, cbrown=0.0, cw=0.0, cm=0.0)


# ---------------------------------------------------------------------------
# coefficient tables
# ---------------------------------------------------------------------------

def _gauss(wl, mu, sigma, amp):
    return amp * np.exp(-((wl - mu) ** 2) / (2.0 * sigma**2))


def test_coefficient_values_match_definitions(grid, coeffs):
    wl = grid.wavelengths
    assert np.allclose(coeffs.k_ab, _gauss(wl, 430, 30, 0.06) + _gauss(wl, 662, 25, 0.08), rtol=0, atol=0)
    assert np.allclose(coeffs.k_ar, _gauss(wl, 470, 30, 0.08), rtol=0, atol=0)
    assert np.allclose(coeffs.k_ant, _gauss(wl, 550, 25, 0.05), rtol=0, atol=0)
    assert np.allclose(coeffs.k_brown, 0.8 * np.exp(-(wl - 400.0) / 250.0), rtol=0, atol=0)
    assert np.allclose(
        coeffs.k_w,
        _gauss(wl, 1200, 50, 10) + _gauss(wl, 1450, 60, 20) + _gauss(wl, 1940, 70, 35),
        rtol=0, atol=0,
    )
    assert np.allclose(
        coeffs.k_m,
        1.5 * np.maximum(0.0, (wl - 800.0) / 1700.0) + _gauss(wl, 2100, 300, 6),
        rtol=0, atol=0,
    )
    assert np.all(coeffs.r_if == 0.04)
    assert coeffs.k_brown[0] == 0.8  # 400 nm


def test_coefficient_csv_roundtrip(tmp_path, grid, coeffs):
    path = tmp_path / "coeffs.csv"
    hf.save_coefficients(coeffs, path)
    back = hf.load_coefficients(path, grid)
    for name in ("k_ab", "k_ar", "k_ant", "k_brown", "k_w", "k_m", "r_if"):
        assert np.array_equal(getattr(back, name), getattr(coeffs, name)), name


def test_load_coefficients_rejects_wrong_grid(tmp_path, grid, coeffs):
    path = tmp_path / "coeffs.csv"
    hf.save_coefficients(coeffs, path)
    with pytest.raises(GridError):
        hf.load_coefficients(path, hf.make_grid(400, 2490, 10))
    with pytest.raises(GridError):
        hf.load_coefficients(path, hf.make_grid(410, 2510, 10))


def test_load_coefficients_rejects_bad_header(tmp_path, grid, coeffs):
    path = tmp_path / "coeffs.csv"
    hf.save_coefficients(coeffs, path)
    text = path.read_text().replace("k_ab", "kab", 1)
    path.write_text(text)
    with pytest.raises(TableFormatError):
        hf.load_coefficients(path, grid)


# ---------------------------------------------------------------------------
# soils
# ---------------------------------------------------------------------------

def test_soil_ramp_formula(grid, soils):
    wl = grid.wavelengths
    for name in soils.names:
        c0, c1 = REGION_SOIL_COEFFS[name]
        want = np.clip(c0 + c1 * (wl - 400.0) / 2100.0, 0.02, 0.6)
        assert np.array_equal(soils.values[soils.index(name)], want), name


def test_soil_library_lookup(soils):
    assert len(soils) == 4
    assert soils.names == ("africa", "france", "spain", "india")
    spec = soils.spectrum(1)
    assert isinstance(spec, Spectrum)
    assert soils.index("spain") == 2
    with pytest.raises(ConfigError):
        soils.index("mars")


def test_unknown_region_is_rejected(grid):
    with pytest.raises(ConfigError, match="africa"):
        hf.generate_reference_soils(grid, ["atlantis"])


def test_soil_csv_roundtrip(tmp_path, grid, soils):
    path = tmp_path / "soil.csv"
    hf.save_soils(soils, path)
    back = hf.load_soils(path, grid)
    assert back.names == soils.names
    assert np.array_equal(back.values, soils.values)


# ---------------------------------------------------------------------------
# leaf optics
# ---------------------------------------------------------------------------

def test_lossless_plate_closed_form():
    r = 0.04
    rho, tau = single_plate(r, 1.0)
    assert math.isclose(float(rho), 2 * r / (1 + r), rel_tol=0, abs_tol=1e-15)
    assert math.isclose(float(tau), (1 - r) / (1 + r), rel_tol=0, abs_tol=1e-15)
    assert float(rho + tau) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("t", [0.2, 0.5, 0.8, 0.99, 1.0])
def test_layer_adding_grouping_invariant(t):
    # stacking (2 then 1) identical plates equals stacking (1 then 2)
    rho, tau = single_plate(0.04, t)
    left = add_layers(*add_layers(rho, tau, rho, tau), rho, tau)
    right = add_layers(rho, tau, *add_layers(rho, tau, rho, tau))
    assert abs(float(left[0] - right[0])) < 1e-12
    assert abs(float(left[1] - right[1])) < 1e-12


def test_layer_adding_identity():
    rho, tau = add_layers(np.array(0.3), np.array(0.5), np.array(0.0), np.array(1.0))
    assert float(rho) == 0.3
    assert float(tau) == 0.5


def test_zero_content_leaf_conserves_energy(grid, coeffs):
    leaf = hf.leaf_optics(_vector(**_ZERO_CONTENT), coeffs)
    closure = leaf.rho_leaf.values + leaf.tau_leaf.values
    assert np.all(np.abs(closure - 1.0) <= 1e-9)


def test_random_leaves_never_gain_energy(coeffs, single_soil_ranges, rng):
    lo, hi = single_soil_ranges.minima, single_soil_ranges.maxima
    params = lo + rng.random((200, 16)) * (hi - lo)
    rho, tau = hf.leaf_optics_batch(params, coeffs)
    assert np.all(rho >= 0) and np.all(tau >= 0)
    assert np.all(rho + tau <= 1.0 + 1e-9)


def _absorption_spectrum(vec, coeffs):
    return sum(
        getattr(vec, content) * coeffs.column(col)
        for content, col in (
            ("cab", "k_ab"), ("car", "k_ar"), ("cant", "k_ant"),
            ("cbrown", "k_brown"), ("cw", "k_w"), ("cm", "k_m"),
        )
    )


def test_fractional_structure_interpolates_between_stacks(coeffs):
    # n = 1.7: per-plate absorption uses 1.7 layers, and the result is the
    # 0.7-weighted blend of the 1-plate and 2-plate stacks of that plate
    vec = _vector(n_struct=1.7)
    k = _absorption_spectrum(vec, coeffs) / 1.7
    rho1, tau1 = single_plate(0.04, np.exp(-k))
    rho2, tau2 = add_layers(rho1, tau1, rho1, tau1)
    want_rho = 0.3 * rho1 + 0.7 * rho2
    want_tau = 0.3 * tau1 + 0.7 * tau2
    leaf = hf.leaf_optics(vec, coeffs)
    assert np.allclose(leaf.rho_leaf.values, want_rho, rtol=0, atol=1e-14)
    assert np.allclose(leaf.tau_leaf.values, want_tau, rtol=0, atol=1e-14)


def test_whole_structure_counts_match_plain_stacks(coeffs):
    # integer n must reproduce the explicit n-plate stack, no interpolation residue
    k = _absorption_spectrum(_vector(), coeffs) / 3.0
    rho1, tau1 = single_plate(0.04, np.exp(-k))
    rho, tau = rho1, tau1
    for _ in range(2):
        rho, tau = add_layers(rho, tau, rho1, tau1)
    leaf = hf.leaf_optics(_vector(n_struct=3.0), coeffs)
    assert np.allclose(leaf.rho_leaf.values, rho, rtol=0, atol=1e-14)
    assert np.allclose(leaf.tau_leaf.values, tau, rtol=0, atol=1e-14)


def test_structure_below_one_is_rejected(coeffs):
    with pytest.raises(ParameterError):
        hf.leaf_optics(_vector(n_struct=0.99), coeffs)


def test_negative_content_is_rejected(coeffs):
    with pytest.raises(ParameterError):
        hf.leaf_optics(_vector(cab=-1.0), coeffs)


# ---------------------------------------------------------------------------
# leaf projection factor
# ---------------------------------------------------------------------------

def _projection_oracle(zenith_deg, leaf_deg):
    """Average |projection| over leaf azimuth, integrated analytically.

    The projection of a leaf normal onto the view direction is
    a + b*cos(phi) with a = cos(zenith)cos(leaf), b = sin(zenith)sin(leaf);
    averaging |a + b cos(phi)| over phi in [0, 2pi) has a closed split form.
    """
    theta, theta_l = math.radians(zenith_deg), math.radians(leaf_deg)
    a = math.cos(theta) * math.cos(theta_l)
    b = math.sin(theta) * math.sin(theta_l)
    if a >= b:
        return a
    phi0 = math.acos(-a / b)
    integral = 4 * a * phi0 + 4 * b * math.sin(phi0) - 2 * a * math.pi
    return integral / (2 * math.pi)


@pytest.mark.parametrize("zenith", [0.0, 5.0, 15.0, 30.0, 45.0, 60.0, 75.0, 84.9])
@pytest.mark.parametrize("leaf", [5.0, 30.0, 57.0, 70.0, 89.0])
def test_projection_matches_azimuth_integral(zenith, leaf):
    assert hf.g_function(zenith, leaf) == pytest.approx(
        _projection_oracle(zenith, leaf), rel=0, abs=1e-12
    )


def test_projection_matches_numeric_quadrature():
    phi = np.linspace(0.0, 2 * np.pi, 2_000_001)
    for zenith, leaf in ((50.0, 60.0), (80.0, 85.0), (20.0, 40.0)):
        theta, theta_l = math.radians(zenith), math.radians(leaf)
        integrand = np.abs(
            math.cos(theta) * math.cos(theta_l)
            + math.sin(theta) * math.sin(theta_l) * np.cos(phi)
        )
        numeric = float(np.trapezoid(integrand, phi)) / (2 * np.pi)
        assert hf.g_function(zenith, leaf) == pytest.approx(numeric, rel=0, abs=1e-6)


def test_projection_vertical_view():
    assert hf.g_function(0.0, 57.0) == pytest.approx(math.cos(math.radians(57.0)), abs=1e-15)


def test_projection_domain_errors():
    with pytest.raises(GeometryError):
        hf.g_function(90.0, 45.0)
    with pytest.raises(GeometryError):
        hf.g_function(-1.0, 45.0)
    with pytest.raises(ParameterError):
        hf.g_function(30.0, 0.0)
    with pytest.raises(ParameterError):
        hf.g_function(30.0, 90.0)


# ---------------------------------------------------------------------------
# canopy
# ---------------------------------------------------------------------------

def test_zero_lai_returns_soil_bitwise(coeffs, soils):
    for soil_row in range(4):
        out = hf.forward(_vector(lai=0.0, soil_index=soil_row), coeffs, soils)
        assert np.array_equal(out.values, soils.values[soil_row])


def test_soil_influence_fades_with_lai(coeffs, soils):
    diffs = []
    for lai in (2.0, 5.0, 10.0):
        a = hf.forward(_vector(lai=lai, soil_index=0), coeffs, soils).values
        b = hf.forward(_vector(lai=lai, soil_index=2), coeffs, soils).values
        diffs.append(float(np.abs(a - b).max()))
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[2] < 2e-2


def test_conservative_scattering_branch_is_continuous(coeffs, soils):
    # a zero-content leaf scatters without loss, hitting the conservative
    # limit exactly; an epsilon of absorber must land next to it
    base = _vector(lai=4.0, **_ZERO_CONTENT)
    conservative = hf.forward(base, coeffs, soils).values
    nearly = hf.forward(base.replace(cw=1e-8), coeffs, soils).values
    assert float(np.abs(nearly - conservative).max()) < 1e-5


def test_more_chlorophyll_darkens_red(coeffs, soils, grid):
    red = int(np.argmin(np.abs(grid.wavelengths - 660.0)))
    values = [
        float(hf.forward(_vector(cab=cab), coeffs, soils).values[red])
        for cab in (10.0, 40.0, 80.0)
    ]
    assert values[0] > values[1] > values[2]


def test_forward_batch_matches_single(coeffs, soils, ranges, rng):
    lo, hi = ranges.minima, ranges.maxima
    params = lo + rng.random((20, 16)) * (hi - lo)
    batch = hf.forward_batch(params, coeffs, soils)
    for i in range(params.shape[0]):
        single = hf.forward(params[i], coeffs, soils)
        assert np.array_equal(batch[i], single.values)


def test_forward_output_stays_physical(coeffs, soils, ranges, rng):
    lo, hi = ranges.minima, ranges.maxima
    params = lo + rng.random((500, 16)) * (hi - lo)
    out = hf.forward_batch(params, coeffs, soils)
    assert np.all(out >= -1e-9)
    assert np.all(out <= 1.0 + 1e-9)


def test_soil_selector_rounds_to_nearest(coeffs, soils):
    a = hf.forward(_vector(soil_index=0.4), coeffs, soils).values
    b = hf.forward(_vector(soil_index=0.0), coeffs, soils).values
    assert np.array_equal(a, b)
    c = hf.forward(_vector(soil_index=2.6), coeffs, soils).values
    d = hf.forward(_vector(soil_index=3.0), coeffs, soils).values
    assert np.array_equal(c, d)


def test_out_of_library_soil_is_rejected(coeffs, soils):
    with pytest.raises(ParameterError, match="soil_index"):
        hf.forward(_vector(soil_index=4.0), coeffs, soils)
    with pytest.raises(ParameterError):
        hf.forward(_vector(soil_index=-0.6), coeffs, soils)


def test_zenith_beyond_configured_limit_is_rejected(coeffs, soils):
    with pytest.raises(GeometryError, match="theta_s"):
        hf.forward(_vector(theta_s=85.0), coeffs, soils)
    hf.forward(_vector(theta_s=84.9), coeffs, soils)  # just inside


def test_negative_lai_is_rejected(coeffs, soils):
    with pytest.raises(ParameterError, match="lai"):
        hf.forward(_vector(lai=-0.1), coeffs, soils)


def test_hotspot_brightens_backscatter(coeffs, soils):
    # aligned sun/view directions see more lit canopy than a wide phase angle
    aligned = _vector(theta_s=30.0, theta_v=30.0, phi_rel=100.0)
    wide = _vector(theta_s=30.0, theta_v=30.0, phi_rel=150.0)
    near = hf.forward(aligned, coeffs, soils).values
    far = hf.forward(wide, coeffs, soils).values
    assert float(np.mean(near - far)) > 0.0


def test_rtm_config_validation():
    with pytest.raises(ConfigError):
        hf.RtmConfig(k_d=0.0)
    with pytest.raises(ConfigError):
        hf.RtmConfig(max_zenith_deg=90.0)
    with pytest.raises(ConfigError):
        hf.RtmConfig(max_zenith_deg=0.0)


def test_grid_mismatch_between_tables_is_rejected(grid, coeffs):
    other = hf.generate_reference_soils(hf.make_grid(400, 2490, 10), ["france"])
    with pytest.raises(ShapeError):
        hf.forward_batch(_vector().to_array()[None, :], coeffs, other)
