import numpy as np
import pytest

from nitns.grid import Grid
from nitns.spectral import dealias_hat, leray_hat, zero_mean


@pytest.fixture
def grid2d():
    return Grid(2, 16)


@pytest.fixture
def grid3d():
    return Grid(3, 8)


def random_band_limited(grid, rng, comps=None, decay=0.5):
    """Random real field supported inside the dealias mask, smooth-ish tail."""
    shape = grid.shape if comps is None else (comps,) + grid.shape
    fh = grid.to_spectral(rng.standard_normal(shape))
    fh = dealias_hat(grid, fh) * np.exp(-decay * grid.kmag)
    return zero_mean(grid, fh)


def random_divfree(grid, rng, decay=0.5):
    """Random divergence-free mean-zero velocity, band limited."""
    uh = random_band_limited(grid, rng, comps=grid.dim, decay=decay)
    return leray_hat(grid, uh)
