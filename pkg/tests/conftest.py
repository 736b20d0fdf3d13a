import numpy as np
import pytest

from abpnet.model import Commodity, CommoditySet, Link, Network, NetworkTopology


def line_network(capacity=100.0):
    """Nodes 0 -> 1 -> 2 with the single commodity destined to node 2."""
    topo = NetworkTopology(3, (Link(0, 1, capacity), Link(1, 2, capacity)))
    return Network(topo, CommoditySet((Commodity(dest=2),)))


@pytest.fixture
def line():
    return line_network()


@pytest.fixture
def line_duals():
    return np.array([[3.0], [1.0], [0.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def report(request):
    """Record one pass/fail line for the acceptance summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def _report(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
