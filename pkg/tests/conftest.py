import numpy as np
import pytest

from nvsram import cell as cellmod
from nvsram.mtj import MtjParams


@pytest.fixture(scope="session")
def params():
    return MtjParams().calibrated()


@pytest.fixture(scope="session")
def cell_config():
    return cellmod.CellConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


class Criterion:
    def __init__(self, name):
        self.name = name
        self.details = []

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    """Collects a name and measured values; prints one PASS/FAIL line after the test."""
    crit = Criterion(request.node.name)
    yield crit
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    line = f"{'PASS' if ok else 'FAIL'}  {crit.name}"
    if crit.details:
        line += "  [" + "; ".join(crit.details) + "]"
    request.config.stash[ACCEPTANCE_KEY].append(line)
    print(line)


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep
