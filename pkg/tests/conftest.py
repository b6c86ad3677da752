import warnings

import numpy as np
import pytest

from ubss.environment import make_rotation_lgds, make_scalar_lgds
from ubss.filters import DominanceWarning


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar():
    return make_scalar_lgds()


@pytest.fixture
def rotation_params():
    """Benchmark systems at a few angles; the fallback warning is expected."""
    def make(theta):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DominanceWarning)
            return make_rotation_lgds(theta)
    return make


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one verdict line per acceptance criterion for the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
