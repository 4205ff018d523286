import numpy as np
import pytest
from hypothesis import settings

from lesionlab.dataset import make_fixtures

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# (criterion, passed, detail) lines collected by the acceptance module
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: int(r[0].split()[1])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_fixtures(tmp_path_factory):
    """Five classes x 4 images of 64 px: quick end-to-end input."""
    root = tmp_path_factory.mktemp("small_fixtures")
    make_fixtures(root, seed=3, per_class=4, size=64)
    return root
