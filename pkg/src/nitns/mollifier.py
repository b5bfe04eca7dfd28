"""Spectral mollification: smoothing multipliers and their inverse square roots.

A mollifier acts mode-wise as multiplication by J(delta*|k|) where J is the
Fourier symbol of the kernel:

    poisson   J(xi) = exp(-xi)
    gaussian  J(xi) = exp(-xi^2 / 2)
    sharp     J(xi) = 1 for xi <= 1, else 0   (Galerkin cutoff at K = 1/delta)

delta = 0 is the identity. The inverse square root J^{-1/2} is used by the
paired-energy diagnostics; it grows exponentially, so its application is
guarded against overflow on the modes the field actually occupies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .spectral import Field, SPECTRAL

__all__ = ["Mollifier", "apply", "apply_inverse_sqrt", "KINDS"]

KINDS = ("poisson", "gaussian", "sharp")

# Largest allowed exponent argument delta*|k| when inverting the kernel.
_OVERFLOW_LIMIT = 60.0


@dataclass(frozen=True)
class Mollifier:
    """Smoothing kernel acting as the spectral multiplier J(delta*|k|)."""

    kind: str = "poisson"
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"mollifier kind must be one of {KINDS}, got {self.kind!r}")
        if not (self.delta >= 0.0):
            raise ValueError(f"mollifier delta must be >= 0, got {self.delta}")

    def multiplier(self, grid: Grid) -> np.ndarray:
        """J(delta*|k|) on the grid's wavenumber lattice."""
        xi = self.delta * grid.kmag
        if self.delta == 0.0:
            return np.ones(grid.shape)
        if self.kind == "poisson":
            return np.exp(-xi)
        if self.kind == "gaussian":
            return np.exp(-0.5 * xi**2)
        return (xi <= 1.0).astype(np.float64)

    def _band(self, grid: Grid) -> np.ndarray:
        return self.delta * grid.kmag <= 1.0

    def apply_hat(self, grid: Grid, fh: np.ndarray) -> np.ndarray:
        return fh * self.multiplier(grid)

    def inverse_sqrt_hat(self, grid: Grid, fh: np.ndarray) -> np.ndarray:
        """Multiply by J(delta*|k|)^{-1/2}; rejects overflowing exponents."""
        if self.delta == 0.0:
            return fh.copy()
        xi = self.delta * grid.kmag
        mag = np.abs(fh)
        if mag.ndim > grid.dim:
            mag = np.max(mag, axis=tuple(range(mag.ndim - grid.dim)))
        # ignore roundoff dust when deciding which modes the field occupies
        occupied = mag > 1e-13 * float(np.max(mag, initial=0.0))
        if self.kind == "sharp":
            outside = occupied & ~self._band(grid)
            if np.any(outside):
                raise ValueError(
                    "sharp-truncation inverse undefined: field has support outside "
                    f"the cutoff band delta*|k| <= 1 (delta={self.delta})"
                )
            return fh.copy()
        xi_max = float(np.max(xi[occupied], initial=0.0))
        if xi_max > _OVERFLOW_LIMIT:
            raise ValueError(
                f"inverse mollification overflow: delta*|k| reaches {xi_max:.1f} on "
                f"occupied modes, limit is {_OVERFLOW_LIMIT:g}"
            )
        if self.kind == "poisson":
            weight = np.exp(0.5 * xi)
        else:
            weight = np.exp(0.25 * xi**2)
        return fh * weight


def apply(m: Mollifier, f: Field) -> Field:
    """Mollify a field: [f] with spectral coefficients J(delta*|k|) f_hat."""
    return Field(f.grid, m.apply_hat(f.grid, f.spec()), SPECTRAL)


def apply_inverse_sqrt(m: Mollifier, f: Field) -> Field:
    """Apply J^{-1/2}; valid only for fields supported where it is finite."""
    return Field(f.grid, m.inverse_sqrt_hat(f.grid, f.spec()), SPECTRAL)
