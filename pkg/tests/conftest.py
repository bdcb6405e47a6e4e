from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs (deselect with -m 'not slow')")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240101)
