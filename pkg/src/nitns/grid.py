"""Periodic grid and spectral transform conventions.

The domain is the torus [0, 2*pi)^dim sampled on n uniform points per axis.
Spectral coefficients follow the convention

    u(x) = sum_k u_hat(k) * exp(i k . x),   k integer lattice, |k_i| <= n/2,

so that ``u_hat = fftn(u) / n**dim`` and Parseval reads
``int |u|^2 dx = (2*pi)**dim * sum_k |u_hat(k)|^2``.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.fft

__all__ = ["Grid", "fft_workers"]


def fft_workers() -> int:
    """Number of FFT worker threads, capped by the NITNS_THREADS env var."""
    raw = os.environ.get("NITNS_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"NITNS_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


class Grid:
    """Uniform periodic grid on [0, 2*pi)^dim with cached wavenumber arrays.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    n : int
        Points per axis; must be a power of two and at least 8.
    """

    def __init__(self, dim: int, n: int):
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"n must be even power of two (>= 8), got {n}")
        self.dim = dim
        self.n = n
        self.shape = (n,) * dim
        self.npoints = n**dim
        self.h = 2.0 * np.pi / n
        self.cell_volume = self.h**dim
        self.volume = (2.0 * np.pi) ** dim
        self.axes = tuple(range(-dim, 0))

        # Integer wavenumbers per axis in FFT order: 0, 1, ..., n/2-1, -n/2, ..., -1.
        k1 = np.fft.fftfreq(n, d=1.0 / n)
        mesh = np.meshgrid(*(k1,) * dim, indexing="ij")
        self.k = np.stack(mesh).astype(np.float64)  # (dim, *shape)
        self.k2 = np.sum(self.k**2, axis=0)
        self.kmag = np.sqrt(self.k2)
        # 1/|k|^2 with the zero mode mapped to 0 (mean handled separately).
        k2_safe = self.k2.copy()
        k2_safe[(0,) * dim] = 1.0
        self.inv_k2 = 1.0 / k2_safe
        self.inv_k2[(0,) * dim] = 0.0

        # Two-thirds rule: keep modes with max_i |k_i| <= n//3.
        self.kcut = n // 3
        self.dealias_mask = np.all(np.abs(self.k) <= self.kcut, axis=0)

        xi = np.arange(n) * self.h
        self.x = np.stack(np.meshgrid(*(xi,) * dim, indexing="ij"))

    # -- transforms ------------------------------------------------------

    def to_spectral(self, phys: np.ndarray) -> np.ndarray:
        """Forward transform of one or more stacked real fields."""
        return scipy.fft.fftn(phys, axes=self.axes, workers=fft_workers()) / self.npoints

    def to_physical(self, spec: np.ndarray) -> np.ndarray:
        """Inverse transform back to real physical samples."""
        out = scipy.fft.ifftn(spec, axes=self.axes, workers=fft_workers()) * self.npoints
        return np.ascontiguousarray(out.real)

    def to_physical_complex(self, spec: np.ndarray) -> np.ndarray:
        """Inverse transform keeping the (roundoff) imaginary part."""
        return scipy.fft.ifftn(spec, axes=self.axes, workers=fft_workers()) * self.npoints

    # -- reductions ------------------------------------------------------

    def integrate(self, phys: np.ndarray) -> float:
        """Quadrature of a physical scalar field over the torus."""
        return float(np.sum(phys) * self.cell_volume)

    def spectral_l2sq(self, spec: np.ndarray) -> float:
        """int |f|^2 dx computed as the Parseval sum over all components."""
        return float(self.volume * np.sum(np.abs(spec) ** 2))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Grid(dim={self.dim}, n={self.n})"
