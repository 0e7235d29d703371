from pathlib import Path

import numpy as np
import pytest

from fks.spectral import Grid

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def band_limited(n, band, rng, mean=1.0, amp=0.4):
    x = Grid.of(n).x
    k = np.arange(1, band + 1)
    a, b = rng.standard_normal((2, band)) / k
    p = a @ np.cos(np.outer(k, x)) + b @ np.sin(np.outer(k, x))
    return mean + amp * p / np.max(np.abs(p))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scenarios():
    return SCENARIOS
