import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat_raster
from seisgrid.grid_model import Location
from seisgrid.hazard import (
    RasterError,
    ShakeRaster,
    draw_pga,
    load_raster,
    location_parameters,
    lookup,
    read_ascii_grid,
    sample_pga,
    synthetic_coastal_raster,
    write_ascii_grid,
)

HEADER = "ncols {c}\nnrows {r}\nxllcorner -124.0\nyllcorner 44.0\ncellsize 1.0\nNODATA_value -9999\n"


def write_grid(path, rows, ncols=None):
    ncols = ncols or len(rows[0].split())
    path.write_text(HEADER.format(c=ncols, r=len(rows)) + "\n".join(rows) + "\n")
    return path


def test_load_two_by_two(tmp_path):
    m = write_grid(tmp_path / "m.asc", ["-1.0 -2.0", "-3.0 -4.0"])
    s = write_grid(tmp_path / "s.asc", ["0.5 0.5", "0.6 0.6"])
    r = load_raster(m, s)
    assert r.mean_ln_pga.size == 4
    assert (r.n_rows, r.n_cols) == (2, 2)
    assert r.mean_ln_pga[0, 1] == -2.0


def test_geometry_mismatch(tmp_path):
    m = write_grid(tmp_path / "m.asc", [" ".join(["0"] * 10)] * 10)
    s = write_grid(tmp_path / "s.asc", [" ".join(["0"] * 9)] * 10)
    with pytest.raises(RasterError, match="geometry mismatch"):
        load_raster(m, s)


def test_non_numeric_cell(tmp_path):
    m = write_grid(tmp_path / "m.asc", ["0 0", "0 abc"])
    with pytest.raises(RasterError, match="row 1 col 1"):
        read_ascii_grid(m)


def test_short_row(tmp_path):
    m = write_grid(tmp_path / "m.asc", ["0 0", "0"], ncols=2)
    with pytest.raises(RasterError, match="expected 2"):
        read_ascii_grid(m)


def test_center_header_variant(tmp_path):
    p = tmp_path / "c.asc"
    p.write_text("ncols 1\nnrows 1\nxllcenter -123.5\nyllcenter 44.5\ncellsize 1.0\n0.25\n")
    g = read_ascii_grid(p)
    assert (g.xllcorner, g.yllcorner) == (-124.0, 44.0)


def test_write_read_round_trip(tmp_path):
    values = np.array([[1.5, np.nan], [-2.25, 0.0]])
    write_ascii_grid(tmp_path / "g.asc", values, -124.0, 44.0, 0.5)
    g = read_ascii_grid(tmp_path / "g.asc")
    np.testing.assert_array_equal(np.isnan(g.values), np.isnan(values))
    np.testing.assert_allclose(g.values[~np.isnan(values)], values[~np.isnan(values)])


def grid3():
    mean = np.arange(9, dtype=float).reshape(3, 3)
    return ShakeRaster(3, 3, 44.0, -124.0, 1.0, mean, np.full((3, 3), 0.5))


def test_lookup_cell_center():
    r = grid3()
    lat, lon = r.cell_center(0, 0)
    assert (lat, lon) == (46.5, -123.5)
    assert lookup(r, lat, lon) == (0.0, 0.5)
    assert lookup(r, *r.cell_center(2, 1)) == (7.0, 0.5)


def test_lookup_out_of_bounds():
    r = grid3()
    # ~1000 km east
    assert lookup(r, 45.0, -124.0 + 13.0) is None
    assert lookup(r, 43.99, -123.5) is None


def test_lookup_boundary_tie_goes_to_lower_index():
    r = grid3()
    # lon -123.0 is the edge between columns 0 and 1; lat 46.0 the edge between rows 0 and 1
    assert r.cell_index(46.5, -123.0) == (0, 0)
    assert r.cell_index(46.0, -123.5) == (0, 0)
    assert r.cell_index(44.0, -121.0) == (2, 2)


def test_nodata_is_out_of_bounds():
    r = grid3()
    r.mean_ln_pga[1, 1] = np.nan
    assert lookup(r, *r.cell_center(1, 1)) is None
    loc = Location(1, *r.cell_center(1, 1))
    assert sample_pga(r, loc, np.random.default_rng(0)).pga_g == 0.0


def test_degenerate_lognormal():
    r = flat_raster(math.log(0.4), 0.0)
    for seed in range(5):
        s = sample_pga(r, Location(3, 45.0, -123.0), np.random.default_rng(seed))
        assert s.pga_g == pytest.approx(0.4, rel=1e-15)
        assert s.location_id == 3


def test_out_of_bounds_is_zero():
    r = flat_raster(0.0, 1.0)
    assert sample_pga(r, Location(1, 10.0, 10.0), np.random.default_rng(0)).pga_g == 0.0


def test_seeded_draw_matches_transform_oracle():
    from test_curves import bisect_ppf

    r = flat_raster(0.0, 1.0)
    u = np.random.default_rng(2024).random()
    expected = math.exp(bisect_ppf(u))
    got = sample_pga(r, Location(1, 45.0, -123.0), np.random.default_rng(2024)).pga_g
    assert got == pytest.approx(expected, rel=1e-9)


def test_log_mean_converges():
    mu, sigma, n = -0.7, 0.6, 40_000
    pga = draw_pga(np.full(n, mu), np.full(n, sigma), np.ones(n, bool), np.random.default_rng(9))
    assert abs(np.log(pga).mean() - mu) < 4 * sigma / math.sqrt(n)


@settings(max_examples=50, deadline=None)
@given(mu=st.floats(-6, 1), sigma=st.floats(0.01, 1.5), seed=st.integers(0, 2**32))
def test_positive_in_bounds(mu, sigma, seed):
    pga = draw_pga(np.array([mu, mu]), np.array([sigma, sigma]), np.array([True, False]), np.random.default_rng(seed))
    assert pga[0] > 0 and pga[1] == 0.0


def test_sigma_zero_is_exp_mean():
    r = synthetic_coastal_raster(sigma_ln=0.0)
    lats, lons = [40.05, 45.05, 49.95], [-126.95, -120.05, -115.05]
    mu, sigma, inside = location_parameters(r, lats, lons)
    pga = draw_pga(mu, sigma, inside, np.random.default_rng(1))
    np.testing.assert_allclose(pga, np.exp(mu))


def test_shipped_raster_matches_closed_form(desk_raster):
    assert (desk_raster.n_rows, desk_raster.n_cols) == (120, 120)
    for col in (0, 30, 60, 119):
        lon = desk_raster.cell_center(5, col)[1]
        expected = -0.9 * max(lon + 124.5, 0.0)
        assert desk_raster.mean_ln_pga[5, col] == pytest.approx(expected, abs=1e-6)
    # east edge: about 0.003 g
    assert desk_raster.mean_ln_pga[:, -1].max() < -8.0
    assert np.all(desk_raster.sigma_ln_pga == 0.6)
