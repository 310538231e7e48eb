import numpy as np
import pytest
import scipy.sparse as sp

from msbench import kernels
from msbench.partitioned import PartitionedMatrix
from msbench.sparse import SparseMatrix


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def worked_example():
    """16 D nodes and 16 G nodes; G node i couples to D node i only.

    Both sides are chains, so the pattern matches the small two-plane
    illustration of aggregate construction (1-based labels there, 0-based
    here). Values are fixed so the 2x2 oracle can be written out by hand.
    """
    n = 16
    i = np.arange(n)
    D = sp.diags([-1.0 * np.ones(n - 1), 4.0 + 0.1 * i, -1.5 * np.ones(n - 1)], [-1, 0, 1])
    G = sp.diags([-0.5 * np.ones(n - 1), 3.0 + 0.05 * i, -0.25 * np.ones(n - 1)], [-1, 0, 1])
    E = sp.diags(1.0 + 0.1 * i)
    F = sp.diags(0.5 - 0.02 * i)
    C = sp.bmat([[D, E], [F, G]], format="csr")
    return PartitionedMatrix(SparseMatrix.from_scipy(C), n)


@pytest.fixture
def fixture_16():
    return worked_example()


ACCEPTANCE = {}


def record(number, ok, detail):
    """Store the verdict of one acceptance criterion for the summary."""
    ACCEPTANCE[number] = (bool(ok), detail)
    return ok


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")
    config.addinivalue_line("markers", "acceptance: numbered acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
