import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pdfem.material import plexiglass
from pdfem.mesh import build_uniform_mesh
from pdfem.kernel import NonlocalContext

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running simulation checks")


@pytest.fixture(scope="session")
def material():
    return plexiglass(0.004)


@pytest.fixture(scope="session")
def small_mesh():
    # 5 x 5 nodes, spacing 2.5 mm
    return build_uniform_mesh(0.01, 0.01, 0.0025)


@pytest.fixture(scope="session")
def small_ctx(material):
    mesh = build_uniform_mesh(0.016, 0.016, 0.001)
    return NonlocalContext(mesh, material)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
