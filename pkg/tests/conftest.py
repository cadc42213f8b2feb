import json
from importlib import resources

import numpy as np
import pytest

from seisgrid.curves import default_curves
from seisgrid.grid_model import case_from_dict, load_case
from seisgrid.hazard import ShakeRaster, load_raster

DATA = resources.files("seisgrid.data")


def two_bus_doc(load_p=100.0, load_q=0.0, x=0.1, r=0.0, lat=45.0, lon=-123.0):
    """Slack at bus 1 (V=1), PQ load at bus 2, one line. Power in MW on a 100 MVA base."""
    return {
        "name": "two-bus",
        "base_mva": 100.0,
        "locations": [{"id": 1, "lat": lat, "lon": lon}],
        "buses": [
            {"id": 1, "location": 1, "base_kv": 230.0, "kind": "slack"},
            {"id": 2, "location": 1, "base_kv": 230.0, "kind": "PQ"},
        ],
        "branches": [{"id": 1, "from": 1, "to": 2, "r": r, "x": x, "b": 0.0, "transformer": False}],
        "generators": [{"id": 1, "bus": 1, "pmax": 1000.0, "pmin": 0.0, "qmax": 500.0, "qmin": -500.0, "vset": 1.0}],
        "loads": [{"id": 1, "bus": 2, "p": load_p, "q": load_q}],
    }


@pytest.fixture
def two_bus():
    return case_from_dict(two_bus_doc())


@pytest.fixture(scope="session")
def desk_case():
    return load_case(DATA / "case30.json")


@pytest.fixture(scope="session")
def desk_raster():
    return load_raster(DATA / "shakemap_mean.asc", DATA / "shakemap_sigma.asc")


@pytest.fixture(scope="session")
def curves():
    return default_curves()


@pytest.fixture(scope="session")
def desk_doc():
    return json.loads((DATA / "case30.json").read_text())


def flat_raster(mu, sigma, lat0=38.0, lon0=-127.0, size=12.0):
    """Single-cell raster with constant parameters."""
    return ShakeRaster(1, 1, lat0, lon0, size, np.array([[mu]]), np.array([[sigma]]))
