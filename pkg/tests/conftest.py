import numpy as np
import pytest

from fuzzy_tilc.config import ScenarioConfig
from fuzzy_tilc import harness

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def default_cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def oven_models(default_cfg):
    """Noise-free database and inverse model of the nominal oven."""
    return harness.build_ideal(default_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
