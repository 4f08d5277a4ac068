import json
from pathlib import Path

import pytest

from nl2gds import annotate, netlist, pdk

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures" / "netlists"
SPECS = REPO / "fixtures" / "specs"

FIXTURE_NAMES = ("ota5t", "ota_cm_bias", "r2r", "caparray", "scfilter")


@pytest.fixture(scope="session")
def mock14():
    return pdk.load_builtin("mock14")


@pytest.fixture(scope="session")
def mock65():
    return pdk.load_builtin("mock65")


@pytest.fixture(scope="session", params=["mock14", "mock65"])
def any_pdk(request):
    return pdk.load_builtin(request.param)


@pytest.fixture(scope="session")
def library():
    return annotate.load_pattern_library(annotate.builtin_library_path())


def load_fixture(name: str):
    netl = netlist.parse_spice((FIXTURES / f"{name}.sp").read_text())
    top = netl.default_top()
    return netl, top, netlist.flatten(netl, top)


def load_spec(name: str):
    path = SPECS / f"{name}.spec"
    if path.exists():
        return annotate.parse_espec(path.read_text())
    return None


@pytest.fixture(scope="session")
def ota5t_flat():
    return load_fixture("ota5t")[2]


def tiny_pdk_doc(**overrides):
    """A small two/three-layer rule set for targeted DRC and router tests."""
    doc = {
        "name": "tiny",
        "layers": [
            {"name": "m1", "Direction": "vertical", "Pitch": 10, "Width": 4,
             "MinL": 10, "MaxL": 1000, "EndToEnd": 9, "Offset": 5,
             "UnitR": 10, "UnitC": 100},
            {"name": "m2", "Direction": "horizontal", "Pitch": 10, "Width": 4,
             "MinL": 10, "MaxL": 1000, "EndToEnd": 9, "Offset": 5,
             "UnitR": 10, "UnitC": 100},
            {"name": "m3", "Direction": "vertical", "Pitch": 10, "Width": 4,
             "MinL": 10, "MaxL": 1000, "EndToEnd": 9, "Offset": 5,
             "UnitR": 5, "UnitC": 90},
        ],
        "vias": [
            {"name": "v1", "From": "m1", "To": "m2", "WidthX": 2, "WidthY": 2,
             "SpaceX": 3, "SpaceY": 3, "VencA_L": 1, "VencA_H": 1,
             "VencP_L": 1, "VencP_H": 1, "R": 1000},
            {"name": "v2", "From": "m2", "To": "m3", "WidthX": 2, "WidthY": 2,
             "SpaceX": 3, "SpaceY": 3, "VencA_L": 1, "VencA_H": 1,
             "VencP_L": 1, "VencP_H": 1, "R": 900},
        ],
        "feol": {"PolyPitch": 10, "FinPitch": 5, "RowHeight": 40},
    }
    doc.update(overrides)
    return doc


@pytest.fixture()
def tiny_pdk(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_pdk_doc()))
    return pdk.load_pdk(path)


def write_pdk(tmp_path, doc, name="custom.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return pdk.load_pdk(path)
