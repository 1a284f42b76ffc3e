import numpy as np
import pytest

from fscl.grid import make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def band_limited(grid, kmax, rng):
    """Random real field with Fourier modes 1..kmax only."""
    x = grid.cell_centers
    out = np.zeros(grid.N)
    for k in range(1, kmax + 1):
        a, b = rng.normal(size=2) / k
        out += a * np.cos(2 * np.pi * k * x / grid.L) + b * np.sin(2 * np.pi * k * x / grid.L)
    return out


@pytest.fixture
def unit_grid():
    return make_grid(1.0, 64)
