import numpy as np
import pytest

from spikectl import arm, diffmap
from spikectl.config import Config
from spikectl.experiments import train_dm


@pytest.fixture(scope="session")
def model():
    return arm.ArmModel()


@pytest.fixture(scope="session")
def trained_dm_weights(tmp_path_factory):
    """Weights of the 3000-iteration babbled map (seed 0), shared by the session."""
    dm, data = train_dm(Config(), seed=0)
    path = tmp_path_factory.mktemp("dm") / "dm_weights.csv"
    diffmap.export_weights(dm, path)
    return path, dm, data


@pytest.fixture
def trained_dm(trained_dm_weights):
    path, dm, _ = trained_dm_weights
    fresh = diffmap.build_dm(dm.config, 0)
    fresh.net.restore_weights(dm.net.weight_snapshot())
    return fresh


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records a verdict for the summary, then asserts it."""
    table = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def check(n: int, ok: bool, detail: str) -> None:
        table[n] = (bool(ok), detail)
        assert ok, f"criterion {n}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(ACCEPTANCE_KEY, None)
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 12):
        ok, detail = table.get(n, (False, "not run to completion"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
