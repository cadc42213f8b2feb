"""Shakemap rasters (ESRI ASCII grids of ln-mean PGA and ln-sigma) and PGA sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curves import normal_ppf

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value")


class RasterError(ValueError):
    pass


@dataclass(frozen=True)
class AsciiGrid:
    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata: float | None
    values: np.ndarray  # (nrows, ncols), row 0 is the northern edge, NODATA -> nan


def read_ascii_grid(path: str | Path) -> AsciiGrid:
    lines = Path(path).read_text().splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0].lower() not in _HEADER_KEYS:
            break
        if len(parts) != 2:
            raise RasterError(f"{path}: malformed header line {i + 1}: {lines[i]!r}")
        header[parts[0].lower()] = parts[1]
        i += 1
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        cellsize = float(header["cellsize"])
        if "xllcorner" in header:
            xll, yll = float(header["xllcorner"]), float(header["yllcorner"])
        else:
            xll = float(header["xllcenter"]) - cellsize / 2
            yll = float(header["yllcenter"]) - cellsize / 2
        nodata = float(header["nodata_value"]) if "nodata_value" in header else None
    except KeyError as exc:
        raise RasterError(f"{path}: missing header field {exc.args[0]}") from None
    except ValueError as exc:
        raise RasterError(f"{path}: bad header value: {exc}") from None
    if ncols <= 0 or nrows <= 0 or not cellsize > 0:
        raise RasterError(f"{path}: grid dimensions and cellsize must be positive")

    rows = []
    for lineno in range(i, len(lines)):
        parts = lines[lineno].split()
        if not parts:
            continue
        row = []
        for col, token in enumerate(parts):
            try:
                row.append(float(token))
            except ValueError:
                raise RasterError(
                    f"{path}: non-numeric cell {token!r} at row {len(rows)} col {col} (line {lineno + 1})"
                ) from None
        if len(row) != ncols:
            raise RasterError(f"{path}: row {len(rows)} has {len(row)} cells, expected {ncols}")
        rows.append(row)
    if len(rows) != nrows:
        raise RasterError(f"{path}: found {len(rows)} rows, expected {nrows}")
    values = np.array(rows, dtype=float)
    if nodata is not None:
        values[values == nodata] = np.nan
    return AsciiGrid(ncols, nrows, xll, yll, cellsize, nodata, values)


def write_ascii_grid(path: str | Path, values: np.ndarray, xllcorner: float, yllcorner: float,
                     cellsize: float, nodata: float = -9999.0) -> None:
    values = np.asarray(values, dtype=float)
    nrows, ncols = values.shape
    out = [
        f"ncols {ncols}",
        f"nrows {nrows}",
        f"xllcorner {xllcorner!r}",
        f"yllcorner {yllcorner!r}",
        f"cellsize {cellsize!r}",
        f"NODATA_value {nodata!r}",
    ]
    for row in values:
        out.append(" ".join(repr(nodata) if np.isnan(v) else f"{v:.6f}" for v in row))
    Path(path).write_text("\n".join(out) + "\n")


@dataclass(frozen=True)
class ShakeRaster:
    """Paired ln-mean / ln-sigma PGA grids sharing one geometry.

    ``origin_lat``/``origin_lon`` are the lower-left corner; grid row 0 is the
    northern edge (ESRI order).
    """

    n_rows: int
    n_cols: int
    origin_lat: float
    origin_lon: float
    cell_size_deg: float
    mean_ln_pga: np.ndarray
    sigma_ln_pga: np.ndarray

    def __post_init__(self):
        if self.mean_ln_pga.shape != (self.n_rows, self.n_cols) or self.sigma_ln_pga.shape != self.mean_ln_pga.shape:
            raise RasterError("mean and sigma grids must share the raster dimensions")
        if np.any(self.sigma_ln_pga[~np.isnan(self.sigma_ln_pga)] < 0):
            raise RasterError("sigma grid has negative values")

    @property
    def top_lat(self) -> float:
        return self.origin_lat + self.n_rows * self.cell_size_deg

    def cell_index(self, lat: float, lon: float) -> tuple[int, int] | None:
        """Nearest-center cell; points on a shared edge go to the lower-index cell."""
        fx = (lon - self.origin_lon) / self.cell_size_deg
        fy = (self.top_lat - lat) / self.cell_size_deg
        if not (0 <= fx <= self.n_cols and 0 <= fy <= self.n_rows):
            return None
        col = max(math.ceil(fx) - 1, 0)
        row = max(math.ceil(fy) - 1, 0)
        return row, col

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.top_lat - (row + 0.5) * self.cell_size_deg,
            self.origin_lon + (col + 0.5) * self.cell_size_deg,
        )


def load_raster(mean_file: str | Path, sigma_file: str | Path) -> ShakeRaster:
    mean = read_ascii_grid(mean_file)
    sigma = read_ascii_grid(sigma_file)
    geom = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
    mismatched = [k for k in geom if not math.isclose(getattr(mean, k), getattr(sigma, k), abs_tol=1e-9)]
    if mismatched:
        raise RasterError(f"geometry mismatch between {mean_file} and {sigma_file}: {', '.join(mismatched)}")
    return ShakeRaster(
        n_rows=mean.nrows,
        n_cols=mean.ncols,
        origin_lat=mean.yllcorner,
        origin_lon=mean.xllcorner,
        cell_size_deg=mean.cellsize,
        mean_ln_pga=mean.values,
        sigma_ln_pga=sigma.values,
    )


def lookup(raster: ShakeRaster, lat: float, lon: float) -> tuple[float, float] | None:
    """(mu_ln, sigma_ln) of the nearest cell, or None out of bounds / on NODATA."""
    idx = raster.cell_index(lat, lon)
    if idx is None:
        return None
    mu = raster.mean_ln_pga[idx]
    sigma = raster.sigma_ln_pga[idx]
    if np.isnan(mu) or np.isnan(sigma):
        return None
    return float(mu), float(sigma)


@dataclass(frozen=True)
class PgaSample:
    location_id: int
    pga_g: float


def location_parameters(raster: ShakeRaster | None, lats, lons) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised lookup: (mu, sigma, in_bounds) arrays; out-of-bounds entries hold 0."""
    n = len(lats)
    mu = np.zeros(n)
    sigma = np.zeros(n)
    inside = np.zeros(n, dtype=bool)
    if raster is None:
        return mu, sigma, inside
    for k, (lat, lon) in enumerate(zip(lats, lons)):
        hit = lookup(raster, lat, lon)
        if hit is not None:
            mu[k], sigma[k] = hit
            inside[k] = True
    return mu, sigma, inside


def draw_pga(mu: np.ndarray, sigma: np.ndarray, inside: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One lognormal PGA per location via inverse transform.

    A uniform is consumed for every location, in order, whether or not it is
    inside the raster, so the stream layout does not depend on the hazard.
    """
    u = rng.random(len(mu))
    with np.errstate(over="ignore"):
        pga = np.exp(mu + sigma * normal_ppf(u))
    return np.where(inside, pga, 0.0)


def sample_pga(raster: ShakeRaster, location, rng: np.random.Generator) -> PgaSample:
    """Sample the PGA (g) at one location; 0 outside the raster."""
    mu, sigma, inside = location_parameters(raster, [location.lat], [location.lon])
    pga = draw_pga(mu, sigma, inside, rng)
    return PgaSample(location.location_id, float(pga[0]))


def synthetic_coastal_raster(
    min_lat: float = 38.0,
    max_lat: float = 50.0,
    min_lon: float = -127.0,
    max_lon: float = -115.0,
    cell_size: float = 0.1,
    coast_lon: float = -124.5,
    peak_pga_g: float = 1.0,
    decay_per_deg: float = 0.9,
    sigma_ln: float = 0.6,
) -> ShakeRaster:
    """Closed-form coastal shakemap.

    ln PGA(lon) = ln(peak) - decay * max(lon - coast_lon, 0): flat at the peak
    west of the coast line, decaying linearly in log space to the east.
    """
    n_rows = round((max_lat - min_lat) / cell_size)
    n_cols = round((max_lon - min_lon) / cell_size)
    lons = min_lon + (np.arange(n_cols) + 0.5) * cell_size
    mean_row = math.log(peak_pga_g) - decay_per_deg * np.maximum(lons - coast_lon, 0.0)
    mean = np.tile(mean_row, (n_rows, 1))
    sigma = np.full((n_rows, n_cols), sigma_ln)
    return ShakeRaster(n_rows, n_cols, min_lat, min_lon, cell_size, mean, sigma)


def write_raster(raster: ShakeRaster, mean_path: str | Path, sigma_path: str | Path) -> None:
    for path, grid in ((mean_path, raster.mean_ln_pga), (sigma_path, raster.sigma_ln_pga)):
        write_ascii_grid(path, grid, raster.origin_lon, raster.origin_lat, raster.cell_size_deg)
