import numpy as np
import pytest

from learnedreg.radon import Geometry, build_operator


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true", help="skip desk-scale runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--skip-slow"):
        skip = pytest.mark.skip(reason="--skip-slow given")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip)


@pytest.fixture(scope="session")
def small_geometry():
    return Geometry(8, 12, 12)


@pytest.fixture(scope="session")
def small_op(small_geometry):
    return build_operator(small_geometry)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
