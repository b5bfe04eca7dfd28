"""Initial conditions: closed-form energies, projection, determinism."""

import numpy as np
import pytest

from nitns.grid import Grid
from nitns.initial import make_initial, scale_to_gradient_reynolds
from nitns.spectral import curl_hat, div_hat


def kinetic_quadrature(grid, uh):
    """Oracle: K = 1/2 int |u|^2 dx by physical quadrature."""
    u = grid.to_physical(uh)
    return 0.5 * grid.integrate(np.sum(u**2, axis=0))


def test_taylor_green_2d_energy_and_divergence():
    g = Grid(2, 32)
    uh = make_initial(g, "taylor_green")
    assert np.max(np.abs(div_hat(g, uh))) < 1e-13
    # quadrature oracle: int |u|^2 = 2 pi^2, so K = pi^2
    k = kinetic_quadrature(g, uh)
    np.testing.assert_allclose(k, np.pi**2, rtol=1e-12)
    # spectral energy agrees with the quadrature
    np.testing.assert_allclose(0.5 * g.spectral_l2sq(uh), k, rtol=1e-12)


def test_taylor_green_3d_energy():
    g = Grid(3, 16)
    uh = make_initial(g, "taylor_green", amplitude=2.0)
    assert np.max(np.abs(div_hat(g, uh))) < 1e-12
    np.testing.assert_allclose(kinetic_quadrature(g, uh), 4 * np.pi**3, rtol=1e-12)


def test_abc_is_beltrami():
    g = Grid(3, 16)
    uh = make_initial(g, "abc", amplitude=1.0)
    assert np.max(np.abs(div_hat(g, uh))) < 1e-13
    # curl u = u for the unit-wavenumber ABC field
    np.testing.assert_allclose(curl_hat(g, uh), uh, atol=1e-13)
    np.testing.assert_allclose(kinetic_quadrature(g, uh), 12 * np.pi**3, rtol=1e-12)


def test_abc_needs_3d():
    with pytest.raises(ValueError, match="dim"):
        make_initial(Grid(2, 16), "abc")


def test_random_band_shell_projection_determinism():
    g = Grid(3, 16)
    a = make_initial(g, "random_band", amplitude=0.7, seed=42, kmin=1, kmax=3)
    b = make_initial(g, "random_band", amplitude=0.7, seed=42, kmin=1, kmax=3)
    np.testing.assert_array_equal(a, b)
    c = make_initial(g, "random_band", amplitude=0.7, seed=43, kmin=1, kmax=3)
    assert np.max(np.abs(a - c)) > 1e-3
    # divergence-free within 1e-12, energy rescaled, support on the shell
    assert np.max(np.abs(div_hat(g, a))) < 1e-12
    np.testing.assert_allclose(kinetic_quadrature(g, a), 0.7, rtol=1e-12)
    outside = (g.kmag < 1 - 1e-9) | (g.kmag > 3 + 1e-9)
    assert np.max(np.abs(a[:, outside])) == 0


def test_random_band_errors():
    g = Grid(2, 16)
    with pytest.raises(ValueError, match="kmax"):
        make_initial(g, "random_band", kmax=9)  # kcut = 5
    with pytest.raises(ValueError, match="kmin"):
        make_initial(g, "random_band", kmin=0)
    with pytest.raises(ValueError, match="shell"):
        make_initial(g, "random_band", kmin=3, kmax=2, seed=1)


def test_unknown_kind():
    with pytest.raises(ValueError, match="kind"):
        make_initial(Grid(2, 16), "vortex_sheet")


def test_scale_to_gradient_reynolds():
    g = Grid(3, 16)
    uh = make_initial(g, "random_band", amplitude=1.0, seed=9, kmin=1, kmax=2)
    nu = 0.8
    scaled = scale_to_gradient_reynolds(g, uh, nu, 0.4)
    two_k = g.spectral_l2sq(scaled)
    grad2 = g.volume * np.sum(g.k2 * np.abs(scaled) ** 2)
    np.testing.assert_allclose((two_k * grad2) ** 0.25 / nu, 0.4, rtol=1e-12)
