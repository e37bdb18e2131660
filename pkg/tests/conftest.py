import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wdlink.bandplan import make_default_plans
from wdlink.scenario import default_scenario_path


@pytest.fixture(scope="session")
def plans():
    return make_default_plans()


@pytest.fixture(scope="session")
def w_plan(plans):
    return plans["W"]


@pytest.fixture(scope="session")
def d_plan(plans):
    return plans["D"]


@pytest.fixture(scope="session")
def default_doc():
    """The bundled scenario as a plain dict, for derived variants."""
    with open(default_scenario_path()) as fh:
        return json.load(fh)


@pytest.fixture()
def scenario_file(tmp_path, default_doc):
    """Write a (possibly modified) scenario doc and return its path."""

    def _write(mutate=None, name="scenario.json"):
        doc = json.loads(json.dumps(default_doc))
        if mutate is not None:
            mutate(doc)
        path = tmp_path / name
        path.write_text(json.dumps(doc, indent=2))
        return path

    return _write
