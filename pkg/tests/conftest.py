import numpy as np
import pytest

from gridfriendly.cli import data_path
from gridfriendly.model import EnergyStorage, Generator, GridLink, MicrogridModel, load_model_file
from gridfriendly.scenario import load_forecast


def make_model(horizon=4, gens=None, storage=None, buy=0.03, sell=0.024, commitment=None, **kw):
    """Small hand-built microgrid for unit tests."""
    if gens is None:
        gens = [Generator("G1", 0.0, 200.0, 800.0, 0.05)]
    if storage is None:
        storage = [EnergyStorage("B1", 50.0, 500.0, 150.0, 150.0, 15.0, 20.0, 250.0)]
    buy = tuple(np.broadcast_to(buy, horizon).astype(float))
    sell = tuple(np.broadcast_to(sell, horizon).astype(float))
    if commitment is None:
        commitment = tuple((1,) * horizon for _ in gens)
    return MicrogridModel(tuple(gens), tuple(storage), GridLink(1200.0, buy, sell), commitment, **kw)


@pytest.fixture(scope="session")
def default_model():
    return load_model_file(data_path("microgrid.ini"))


@pytest.fixture(scope="session")
def default_forecast():
    return load_forecast(*(data_path(n).read_text() for n in ("load.csv", "wind.csv", "solar.csv")))


@pytest.fixture(scope="session")
def sim10(default_model, default_forecast):
    from gridfriendly.engine import simulate
    from gridfriendly.scenario import make_scenario

    return simulate(default_model, make_scenario(default_forecast, 0.10, 0, default_model))


# criterion number -> (description, passed); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        text, ok = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}")
