from __future__ import annotations

import pytest
from hypothesis import settings

from diffmech.scenario_io import load_bundled

# the sandbox is slow and some property bodies rebuild scenarios; timing
# them per-example is noise
settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def example2():
    return load_bundled("example2")


@pytest.fixture(scope="session")
def figure1():
    return load_bundled("figure1")


@pytest.fixture(scope="session")
def figure5():
    return load_bundled("figure5")


@pytest.fixture(scope="session")
def qaidm_failure():
    return load_bundled("qaidm_failure")
