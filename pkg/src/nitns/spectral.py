"""Fields on the periodic grid and the spectral calculus on them.

Two layers live here. The raw layer (functions with a ``_hat`` suffix) works on
bare spectral coefficient arrays and is what the time steppers use. The Field
layer wraps an array with its grid and representation tag and converts as
needed; it is the public currency for scripts and tests.

Array layout: scalars are shaped ``grid.shape``; vectors ``(dim, *shape)``;
rank-2 tensors ``(dim, dim, *shape)`` with ``T[c, d] = d_d f_c`` (component c,
derivative d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid

__all__ = [
    "Field",
    "to_spectral",
    "to_physical",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "leray_project",
    "biot_savart",
    "dealias",
    "grad_hat",
    "div_hat",
    "curl_hat",
    "lap_hat",
    "leray_hat",
    "biot_savart_hat",
    "dealias_hat",
    "zero_mean",
    "eval_modes_at",
]

PHYSICAL = "physical"
SPECTRAL = "spectral"


@dataclass(frozen=True)
class Field:
    """A scalar/vector/tensor field with an explicit representation tag."""

    grid: Grid
    data: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        if self.space not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"space must be physical|spectral, got {self.space!r}")
        extra = self.data.ndim - self.grid.dim
        if extra < 0 or self.data.shape[extra:] != self.grid.shape:
            raise ValueError(
                f"field shape {self.data.shape} does not end with grid shape {self.grid.shape}"
            )

    @property
    def rank(self) -> int:
        return self.data.ndim - self.grid.dim

    def spec(self) -> np.ndarray:
        """Spectral coefficients of this field."""
        if self.space == SPECTRAL:
            return self.data
        return self.grid.to_spectral(self.data)

    def phys(self) -> np.ndarray:
        """Physical samples of this field."""
        if self.space == PHYSICAL:
            return self.data
        return self.grid.to_physical(self.data)


def to_spectral(f: Field) -> Field:
    if f.space == SPECTRAL:
        return f
    return Field(f.grid, f.grid.to_spectral(f.data), SPECTRAL)


def to_physical(f: Field) -> Field:
    if f.space == PHYSICAL:
        return f
    return Field(f.grid, f.grid.to_physical(f.data), PHYSICAL)


# -- raw spectral operators ----------------------------------------------


def grad_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """Gradient; inserts a derivative axis right before the grid axes."""
    lead = fh.ndim - grid.dim
    expanded = np.expand_dims(fh, axis=lead)
    return 1j * expanded * grid.k.reshape((1,) * lead + grid.k.shape)


def div_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    """Divergence of a vector field, contracting the leading axis."""
    return np.einsum("j...,j...->...", 1j * grid.k, vh)


def curl_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    """Curl of a vector field: a vector in 3D, a scalar in 2D."""
    k = grid.k
    if grid.dim == 2:
        return 1j * (k[0] * vh[1] - k[1] * vh[0])
    return np.stack(
        [
            1j * (k[1] * vh[2] - k[2] * vh[1]),
            1j * (k[2] * vh[0] - k[0] * vh[2]),
            1j * (k[0] * vh[1] - k[1] * vh[0]),
        ]
    )


def lap_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    return -grid.k2 * fh


def leray_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    """Project onto divergence-free fields; the mean mode passes through."""
    kdotv = np.einsum("j...,j...->...", grid.k, vh)
    return vh - grid.k * (kdotv * grid.inv_k2)


def biot_savart_hat(grid: Grid, wh: np.ndarray) -> np.ndarray:
    """Divergence-free, mean-zero velocity whose curl is the given vorticity."""
    k, inv_k2 = grid.k, grid.inv_k2
    if grid.dim == 2:
        uh = np.stack([1j * k[1] * wh, -1j * k[0] * wh]) * inv_k2
    else:
        uh = (
            np.stack(
                [
                    1j * (k[1] * wh[2] - k[2] * wh[1]),
                    1j * (k[2] * wh[0] - k[0] * wh[2]),
                    1j * (k[0] * wh[1] - k[1] * wh[0]),
                ]
            )
            * inv_k2
        )
    uh[(slice(None),) + (0,) * grid.dim] = 0.0
    return uh


def dealias_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    return fh * grid.dealias_mask


def zero_mean(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """Zero the k=0 coefficient of every component, in place, and return it."""
    fh[(Ellipsis,) + (0,) * grid.dim] = 0.0
    return fh


# -- Field-level wrappers --------------------------------------------------


def gradient(f: Field) -> Field:
    return Field(f.grid, grad_hat(f.grid, f.spec()), SPECTRAL)


def divergence(f: Field) -> Field:
    if f.rank != 1:
        raise ValueError("divergence expects a vector field")
    return Field(f.grid, div_hat(f.grid, f.spec()), SPECTRAL)


def curl(f: Field) -> Field:
    if f.rank != 1:
        raise ValueError("curl expects a vector field")
    return Field(f.grid, curl_hat(f.grid, f.spec()), SPECTRAL)


def laplacian(f: Field) -> Field:
    return Field(f.grid, lap_hat(f.grid, f.spec()), SPECTRAL)


def leray_project(f: Field) -> Field:
    if f.rank != 1:
        raise ValueError("leray_project expects a vector field")
    return Field(f.grid, leray_hat(f.grid, f.spec()), SPECTRAL)


def biot_savart(f: Field) -> Field:
    expected = 0 if f.grid.dim == 2 else 1
    if f.rank != expected:
        raise ValueError("biot_savart expects a scalar vorticity in 2D, a vector in 3D")
    return Field(f.grid, biot_savart_hat(f.grid, f.spec()), SPECTRAL)


def dealias(f: Field) -> Field:
    return Field(f.grid, dealias_hat(f.grid, f.spec()), SPECTRAL)


# -- off-lattice evaluation -------------------------------------------------


def eval_modes_at(grid: Grid, fh: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate a band-limited spectral field at arbitrary points.

    Direct mode summation, O(modes * points); intended for small diagnostics
    such as particle tracking, not for bulk transforms.

    Parameters
    ----------
    fh : spectral coefficients, shape (*comps, *grid.shape)
    points : positions, shape (npts, dim)

    Returns
    -------
    values, shape (*comps, npts), real part of the mode sum.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    kflat = grid.k.reshape(grid.dim, -1)  # (dim, nmodes)
    coeffs = fh.reshape(fh.shape[: fh.ndim - grid.dim] + (-1,))  # (*comps, nmodes)
    nz = np.any(coeffs != 0, axis=tuple(range(coeffs.ndim - 1)))
    phase = np.exp(1j * (points @ kflat[:, nz]))  # (npts, nnz)
    return np.real(coeffs[..., nz] @ phase.T)
