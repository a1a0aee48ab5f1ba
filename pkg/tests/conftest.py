import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spincollapse.model import ModelConfig, build_couplings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_couplings():
    """N_A=4, N_E=3: L=8, dense-checkable."""
    return build_couplings(ModelConfig(n_env=3), seed=11)


@pytest.fixture(scope="session")
def tiny_couplings():
    """N_A=4, N_E=1: L=6."""
    return build_couplings(ModelConfig(n_env=1), seed=5)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_report(request):
    """``report(number, name, status, detail)`` records one acceptance line."""
    lines = request.config.stash[_ACCEPTANCE]

    def report(number, name, status, detail=""):
        line = f"criterion {number} {name}: {status}" + (f"  {detail}" if detail else "")
        lines.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
