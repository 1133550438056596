"""Shared fixtures: one canonical grid/physics setup and prebuilt tables.

The heavyweight lookup tables are session-scoped so the acceptance tests
share them; everything is seeded, so any table is reproducible on its own.
The ``criterion`` fixture records one PASS/FAIL line per acceptance
criterion and prints the collected lines in the terminal summary.
"""

import numpy as np
import pytest

import hsforge as hf

_CRITERION_ATTR = "_hsforge_criterion_lines"


def pytest_configure(config):
    setattr(config, _CRITERION_ATTR, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, _CRITERION_ATTR, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture(scope="session")
def criterion(pytestconfig):
    lines = getattr(pytestconfig, _CRITERION_ATTR)

    def _record(number: int, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        lines[number] = f"criterion {number:2d}: {status} - {detail}"
        assert passed, f"criterion {number}: {detail}"

    return _record


@pytest.fixture(scope="session")
def grid():
    return hf.canonical_grid()


@pytest.fixture(scope="session")
def coeffs(grid):
    return hf.generate_reference_coefficients(grid)


@pytest.fixture(scope="session")
def soils(grid):
    return hf.generate_reference_soils(grid, ["africa", "france", "spain", "india"])


@pytest.fixture(scope="session")
def france_soils(grid):
    return hf.generate_reference_soils(grid, ["france"])


@pytest.fixture(scope="session")
def band_set():
    return hf.default_sensor_bands()


@pytest.fixture(scope="session")
def ranges(soils):
    return hf.default_ranges(0, len(soils) - 1)


@pytest.fixture(scope="session")
def single_soil_ranges():
    return hf.default_ranges(0, 0)


@pytest.fixture(scope="session")
def lut_small(coeffs, france_soils, single_soil_ranges):
    """500-entry table for cheap inversion tests."""
    cfg = hf.LhsConfig(target_size=500, seed=13, ranges=single_soil_ranges)
    return hf.build_lut(cfg, hf.ConstraintConfig(), coeffs, france_soils)


@pytest.fixture(scope="session")
def lut_5000(coeffs, france_soils, single_soil_ranges):
    cfg = hf.LhsConfig(target_size=5000, seed=101, ranges=single_soil_ranges)
    return hf.build_lut(cfg, hf.ConstraintConfig(), coeffs, france_soils)


@pytest.fixture(scope="session")
def warm_kernel():
    """Compile the parallel search kernel once before any timed use."""
    table = np.linspace(0.0, 1.0, 12, dtype=np.float64).reshape(4, 3)
    obs = np.zeros((2, 3), dtype=np.float64)
    hf.topk_search(table, obs, 2, workers=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260821)
