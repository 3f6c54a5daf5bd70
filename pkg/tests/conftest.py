import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data")


@pytest.fixture(scope="session")
def data_dir() -> str:
    return os.path.abspath(DATA_DIR)


@pytest.fixture(scope="session")
def base_run():
    from preterm_sd.engine import SimConfig, run
    from preterm_sd.model import PretermModel, build_scenario

    params, switches = build_scenario("base")
    model = PretermModel(params, switches)
    return run(model, SimConfig(), model.initial_state(1995.0))


@pytest.fixture(scope="session")
def scenario_runs():
    from preterm_sd.engine import SimConfig, run
    from preterm_sd.model import PretermModel, build_scenario

    out = {}
    for name in ("base", "s1", "s2"):
        params, switches = build_scenario(name)
        model = PretermModel(params, switches)
        out[name] = run(model, SimConfig(), model.initial_state(1995.0))
    return out
