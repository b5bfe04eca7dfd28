"""Initial velocity fields: classic vortex arrays and seeded random bands."""

from __future__ import annotations

import numpy as np

from .grid import Grid
from .spectral import dealias_hat, div_hat, leray_hat, zero_mean

__all__ = ["make_initial", "scale_to_gradient_reynolds", "IC_KINDS"]

IC_KINDS = ("taylor_green", "abc", "random_band")


def make_initial(
    grid: Grid,
    kind: str,
    amplitude: float = 1.0,
    seed: int = 0,
    kmin: int = 1,
    kmax: int | None = None,
) -> np.ndarray:
    """Build a divergence-free, mean-zero initial velocity in spectral form.

    taylor_green : single-harmonic vortex array; in 2D an exact decaying
        solution of the viscous equations. `amplitude` scales the velocity.
    abc : 3D Beltrami flow with A = B = C = amplitude.
    random_band : seeded Gaussian field projected divergence-free, supported
        on the shell kmin <= |k| <= kmax, rescaled so the kinetic energy
        equals `amplitude`.
    """
    if kind == "taylor_green":
        u = _taylor_green(grid, amplitude)
    elif kind == "abc":
        u = _abc(grid, amplitude)
    elif kind == "random_band":
        return _random_band(grid, amplitude, seed, kmin, kmax)
    else:
        raise ValueError(f"ic kind must be one of {IC_KINDS}, got {kind!r}")
    uh = dealias_hat(grid, grid.to_spectral(u))
    return zero_mean(grid, uh)


def _taylor_green(grid: Grid, a: float) -> np.ndarray:
    if grid.dim == 2:
        x, y = grid.x
        return np.stack([a * np.cos(x) * np.sin(y), -a * np.sin(x) * np.cos(y)])
    x, y, z = grid.x
    return np.stack(
        [
            a * np.sin(x) * np.cos(y) * np.cos(z),
            -a * np.cos(x) * np.sin(y) * np.cos(z),
            np.zeros(grid.shape),
        ]
    )


def _abc(grid: Grid, a: float) -> np.ndarray:
    if grid.dim != 3:
        raise ValueError("abc initial condition requires dim = 3")
    x, y, z = grid.x
    return np.stack(
        [
            a * (np.sin(z) + np.cos(y)),
            a * (np.sin(x) + np.cos(z)),
            a * (np.sin(y) + np.cos(x)),
        ]
    )


def _random_band(grid: Grid, energy: float, seed: int, kmin: int, kmax: int | None) -> np.ndarray:
    if kmax is None:
        kmax = min(4, grid.kcut)
    if kmin < 1:
        raise ValueError(f"random_band needs kmin >= 1, got {kmin}")
    if kmax > grid.kcut:
        raise ValueError(
            f"random_band kmax={kmax} exceeds the dealias cutoff {grid.kcut} for n={grid.n}"
        )
    shell = (grid.kmag >= kmin - 1e-9) & (grid.kmag <= kmax + 1e-9)
    if not np.any(shell):
        raise ValueError(f"empty wavenumber shell [{kmin}, {kmax}]")
    rng = np.random.default_rng(seed)
    uh = grid.to_spectral(rng.standard_normal((grid.dim,) + grid.shape))
    uh *= shell
    uh = leray_hat(grid, uh)
    zero_mean(grid, uh)
    assert np.max(np.abs(div_hat(grid, uh))) < 1e-12 * max(1.0, float(np.max(np.abs(uh))))
    k_now = 0.5 * grid.volume * np.sum(np.abs(uh) ** 2)
    if k_now == 0.0:
        raise ValueError(f"random_band produced an empty field on shell [{kmin}, {kmax}]")
    return uh * np.sqrt(energy / k_now)


def scale_to_gradient_reynolds(grid: Grid, uh: np.ndarray, nu: float, target: float) -> np.ndarray:
    """Rescale a velocity so nu^-1 (2K)^(1/4) (int |grad u|^2)^(1/4) hits `target`.

    The quantity is linear in the velocity scale, so the factor is closed-form.
    """
    two_k = grid.volume * np.sum(np.abs(uh) ** 2)
    grad2 = grid.volume * np.sum(grid.k2 * np.abs(uh) ** 2)
    current = (two_k**0.25) * (grad2**0.25) / nu
    if current == 0:
        raise ValueError("cannot rescale a zero field")
    return uh * (target / current)
