"""Measured quantities: energies, vorticity geometry, spectral norms, budgets.

Conventions (also echoed in the CSV header): kinetic energy, dissipation,
enstrophy and the other integrals carry the (2*pi)^dim volume factor of the
torus; the analyticity norms and the Gevrey monitor are bare spectral sums
with no volume factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .grid import Grid
from .mollifier import Mollifier
from .spectral import curl_hat, grad_hat

__all__ = [
    "CSV_COLUMNS",
    "DiagnosticsRecord",
    "NondimNumbers",
    "PairedEnergy",
    "R0_SMALLNESS_THRESHOLD",
    "kinetic_energy",
    "dissipation_rate",
    "enstrophy",
    "vorticity_l1",
    "vorticity_direction",
    "direction_dissipation",
    "stretching_alpha",
    "analytic_norm",
    "gevrey_y",
    "energy_budget_residual",
    "vortex_energy_pair",
    "nondim_numbers",
    "pointwise_bound_slack",
    "sup_interpolation_ratio",
    "displacement_bound_report",
]

# Exact CSV column set, in order.
CSV_COLUMNS = [
    "t",
    "K",
    "eps",
    "enstrophy",
    "omega_l1",
    "dir_diss",
    "alpha_max",
    "u_linf",
    "suf1",
    "suf2",
    "maxu",
    "y_gevrey",
    "budget_residual",
    "max_grad_ell",
    "logdet_err",
    "weber_cauchy_err",
    "restarts",
    "G",
    "rho",
    "tau",
]

# Initial-data smallness threshold 2 * pi^(-1/2) * 3^(-3/4) for decay runs.
R0_SMALLNESS_THRESHOLD = 2.0 / (math.sqrt(math.pi) * 3.0**0.75)

# Guard for exponential spectral weights.
_EXP_LIMIT = 300.0

# Radius fraction used when reporting analytic-norm scales: r = (1 - gamma) * lam.
REPORT_GAMMA = 0.2


@dataclass
class DiagnosticsRecord:
    """One output-time row; CSV_COLUMNS name the delimited subset."""

    t: float
    K: float
    eps: float
    enstrophy: float
    omega_l1: float
    dir_diss: float
    alpha_max: float
    u_linf: float
    suf1: float
    suf2: float
    maxu: float
    y_gevrey: float
    budget_residual: float
    max_grad_ell: float | None = None
    logdet_err: float | None = None
    weber_cauchy_err: float | None = None
    restarts: int | None = None
    G: float | None = None
    rho: float | None = None
    tau: float | None = None
    # in-memory extras, not part of the CSV
    paired_energy: float | None = None
    paired_energy_spectral: float | None = None
    paired_dissipation: float | None = None
    paired_dissipation_spectral: float | None = None
    paired_budget_residual: float | None = None
    pointwise_slack: float | None = None
    interp_ratio: float | None = None
    ltwo_ratio: float | None = None
    nablaeltwo_ratio: float | None = None
    maxdel_ratio: float | None = None
    lbound_ratio: float | None = None
    grad_norm_ratio: float | None = None
    second_grad_ratio: float | None = None

    def csv_values(self) -> list:
        return [getattr(self, name) for name in CSV_COLUMNS]


@dataclass(frozen=True)
class NondimNumbers:
    """Dimensionless groups built from nu, the horizon T, and flow history."""

    R0: float
    G: float
    rho: float
    lambda_tilde: float
    U_r: float
    tau: float
    R0_threshold: float = R0_SMALLNESS_THRESHOLD


@dataclass(frozen=True)
class PairedEnergy:
    """Dual-path mollified energy/dissipation pairing."""

    energy_physical: float
    energy_spectral: float
    dissipation_physical: float
    dissipation_spectral: float


# ----------------------------------------------------------------- scalars


def kinetic_energy(grid: Grid, uh: np.ndarray) -> float:
    """K = 1/2 int |u|^2 dx via the Parseval sum."""
    return 0.5 * grid.volume * float(np.sum(np.abs(uh) ** 2))


def dissipation_rate(grid: Grid, uh: np.ndarray, nu: float) -> float:
    """eps = nu int |grad u|^2 dx."""
    return nu * grid.volume * float(np.sum(grid.k2 * np.abs(uh) ** 2))


def enstrophy(grid: Grid, wh: np.ndarray) -> float:
    """int |w|^2 dx (no 1/2)."""
    return grid.volume * float(np.sum(np.abs(wh) ** 2))


def vorticity_l1(grid: Grid, w_phys: np.ndarray) -> float:
    """int |w| dx by quadrature; |.| is the pointwise Euclidean magnitude."""
    if w_phys.ndim == grid.dim:
        mag = np.abs(w_phys)
    else:
        mag = np.sqrt(np.sum(w_phys**2, axis=0))
    return grid.integrate(mag)


# ------------------------------------------------- vorticity direction field


def vorticity_direction(grid: Grid, w_phys: np.ndarray, rel_floor: float = 1e-12):
    """Unit direction xi = w/|w| and the mask where |w| clears the floor."""
    w = w_phys[np.newaxis] if w_phys.ndim == grid.dim else w_phys
    mag = np.sqrt(np.sum(w**2, axis=0))
    mask = mag > rel_floor * float(np.max(mag, initial=0.0))
    safe = np.where(mask, mag, 1.0)
    xi = np.where(mask, w / safe, 0.0)
    return xi, mask


def direction_dissipation(grid: Grid, wh: np.ndarray, rel_floor: float = 1e-12) -> float:
    """int |w| |grad(w/|w|)|^2 dx over the unmasked region.

    The direction gradient is assembled pointwise from the spectral gradient
    of w via the chain rule; the non-smooth masked field itself is never
    differentiated spectrally.
    """
    wh_s = wh[np.newaxis] if wh.ndim == grid.dim else wh
    w = grid.to_physical(wh_s)
    gw = grid.to_physical(grad_hat(grid, wh_s))  # (c, d, *shape)
    mag = np.sqrt(np.sum(w**2, axis=0))
    mask = mag > rel_floor * float(np.max(mag, initial=0.0))
    safe = np.where(mask, mag, 1.0)
    # d_d xi_c = gw[c,d]/|w| - w_c (sum_m w_m gw[m,d]) / |w|^3
    wdotg = np.einsum("m...,md...->d...", w, gw)
    gxi = gw / safe - w[:, np.newaxis] * wdotg[np.newaxis] / safe**3
    integrand = mag * np.sum(gxi**2, axis=(0, 1))
    return float(np.sum(integrand[mask]) * grid.cell_volume)


def stretching_alpha(grid: Grid, uh: np.ndarray, wh: np.ndarray, rel_floor: float = 1e-12):
    """Stretching factor alpha = xi . S xi with S the symmetric rate of strain.

    Identically zero in 2D. Returns (alpha, mask).
    """
    if grid.dim == 2:
        zeros = np.zeros(grid.shape)
        return zeros, np.ones(grid.shape, dtype=bool)
    xi, mask = vorticity_direction(grid, grid.to_physical(wh), rel_floor)
    gu = grid.to_physical(grad_hat(grid, uh))  # gu[c,d] = d_d u_c
    s = 0.5 * (gu + np.swapaxes(gu, 0, 1))
    alpha = np.einsum("i...,ij...,j...->...", xi, s, xi)
    return np.where(mask, alpha, 0.0), mask


# ------------------------------------------------------------ spectral norms


def analytic_norm(grid: Grid, fh: np.ndarray, lam: float, p: int) -> float:
    """{sum_k e^{p*lam*|k|} |f_hat|^p}^{1/p}; bare sum, p in {1, 2}."""
    if p not in (1, 2):
        raise ValueError(f"analytic_norm order p must be 1 or 2, got {p}")
    if lam < 0:
        raise ValueError(f"analytic_norm radius must be >= 0, got {lam}")
    mag = np.abs(fh)
    if mag.ndim > grid.dim:
        mag = np.sqrt(np.sum(mag**2, axis=0)) if p == 2 else np.sum(mag, axis=0)
        # p=1 on a vector: use the component l1 magnitude; p=2 the Euclidean one
    occupied = mag > 1e-300
    xmax = float(np.max(p * lam * grid.kmag[occupied], initial=0.0))
    if xmax > _EXP_LIMIT:
        max_lam = _EXP_LIMIT / (p * float(np.max(grid.kmag[occupied])))
        raise ValueError(
            f"analytic_norm overflow: p*lam*|k| reaches {xmax:.1f}; "
            f"largest admissible lam here is {max_lam:.3g}"
        )
    weight = np.exp(p * lam * grid.kmag)
    return float(np.sum(weight * mag**p) ** (1.0 / p))


def gevrey_y(grid: Grid, wh: np.ndarray, nu: float, horizon: float, s: float, t: float) -> float:
    """Exponentially weighted enstrophy monitor y(t) = sum e^{2 v (t-s) |k|} |w_hat|^2.

    v = sqrt(nu / horizon); bare spectral sum. Requires t >= s.
    """
    if t < s:
        raise ValueError(f"gevrey_y needs t >= s, got t={t} < s={s}")
    v = math.sqrt(nu / horizon)
    rate = 2.0 * v * (t - s)
    mag2 = np.abs(wh) ** 2
    if mag2.ndim > grid.dim:
        mag2 = np.sum(mag2, axis=0)
    xmax = rate * float(np.max(grid.kmag[mag2 > 1e-300], initial=0.0))
    if xmax > _EXP_LIMIT:
        raise ValueError(f"gevrey_y overflow: exponent reaches {xmax:.1f}")
    return float(np.sum(np.exp(rate * grid.kmag) * mag2))


# ------------------------------------------------------------------ budgets


def energy_budget_residual(t: np.ndarray, kinetic: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """K(t) + int_0^t eps ds - K(0), with the integral by trapezoid."""
    t = np.asarray(t, dtype=float)
    kinetic = np.asarray(kinetic, dtype=float)
    eps = np.asarray(eps, dtype=float)
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (eps[1:] + eps[:-1]) * np.diff(t))])
    return kinetic + cumulative - kinetic[0]


def vortex_energy_pair(grid: Grid, uh: np.ndarray, m: Mollifier) -> PairedEnergy:
    """Paired energy 1/2 int u.[u] and dissipation int tr{grad u (grad [u])^T}.

    Each is computed twice: by physical quadrature and as a spectral sum over
    the mollified field with inverse kernel weights (via the inverse square
    root applied to [u]).
    """
    mu_h = m.apply_hat(grid, uh)
    u = grid.to_physical(uh)
    mu = grid.to_physical(mu_h)
    e_phys = 0.5 * grid.integrate(np.sum(u * mu, axis=0))
    gu = grid.to_physical(grad_hat(grid, uh))
    gmu = grid.to_physical(grad_hat(grid, mu_h))
    d_phys = grid.integrate(np.sum(gu * gmu, axis=0).sum(axis=0))

    half_weighted = m.inverse_sqrt_hat(grid, mu_h)  # J^{-1/2} [u] = J^{1/2} u
    e_spec = 0.5 * grid.volume * float(np.sum(np.abs(half_weighted) ** 2))
    d_spec = grid.volume * float(np.sum(grid.k2 * np.abs(half_weighted) ** 2))
    return PairedEnergy(e_phys, e_spec, d_phys, d_spec)


# ---------------------------------------------------------- derived numbers


def nondim_numbers(
    nu: float,
    horizon: float,
    k0: float,
    enstrophy0: float,
    enstrophy_max: float,
    g: float,
    s0: float,
) -> NondimNumbers:
    """Dimensionless groups from initial data and the running enstrophy sup.

    U_r is the velocity analyticity scale evaluated at the report radius
    r = (1 - gamma) * lambda_tilde with gamma = REPORT_GAMMA; its explicit
    prefactor 2 sqrt(2 pi / e) is kept.
    """
    r0 = (2.0 * k0) ** 0.25 * enstrophy0**0.25 / nu
    g2 = math.sqrt(horizon) * enstrophy_max / nu**1.5
    big_g = math.sqrt(g2) if g2 > 0 else 0.0
    rho = big_g**4
    lambda_tilde = min(s0, 1.0 / rho) if rho > 0 else s0
    gap = REPORT_GAMMA * lambda_tilde
    u_r = 2.0 * math.sqrt(2.0 * math.pi / math.e) * big_g / math.sqrt(gap) if gap > 0 else math.inf
    tau = g * big_g**-7 if big_g > 0 else math.inf
    return NondimNumbers(r0, big_g, rho, lambda_tilde, u_r, tau)


# ------------------------------------------------------------------- checks


def pointwise_bound_slack(grid: Grid, uh: np.ndarray, wh: np.ndarray) -> float:
    """Largest excess of |k| |u_hat(k)| over |w_hat(k)|, against max |w_hat|.

    Divergence-free velocities satisfy |u_hat| <= |w_hat| / |k| mode by mode
    (with equality), so the excess is pure roundoff.  It is measured relative
    to the spectrum's magnitude scale: transform roundoff contaminates every
    mode at that scale, so modes near the floor would otherwise report
    noise-over-noise ratios.
    """
    umag = np.sqrt(np.sum(np.abs(uh) ** 2, axis=0))
    wmag = np.abs(wh) if wh.ndim == grid.dim else np.sqrt(np.sum(np.abs(wh) ** 2, axis=0))
    scale = float(np.max(wmag, initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(grid.kmag * umag - wmag) / scale)


def sup_interpolation_ratio(grid: Grid, uh: np.ndarray, wh: np.ndarray) -> float:
    """||u||_inf / (sqrt(4 pi) ||w||_2^{1/2} ||grad w||_2^{1/2}); report only.

    The constant is a whole-space result, so on the torus this ratio is
    logged, never asserted.
    """
    u_inf = float(np.max(np.sqrt(np.sum(grid.to_physical(uh) ** 2, axis=0))))
    w2 = math.sqrt(grid.volume * float(np.sum(np.abs(wh) ** 2)))
    gw2 = math.sqrt(grid.volume * float(np.sum(grid.k2 * np.abs(wh) ** 2)))
    denom = math.sqrt(4.0 * math.pi) * math.sqrt(w2) * math.sqrt(gw2)
    return u_inf / denom if denom > 0 else 0.0


def displacement_bound_report(records) -> dict:
    """Summarize displacement bound ratios over a run's records.

    The L2 and time-integrated gradient ratios have explicit constants and
    must stay <= 1; the sup-norm and analytic-norm families carry unknown
    constants (set to 1 here) and are informational.
    """
    def _max(name):
        vals = [getattr(r, name) for r in records if getattr(r, name) is not None]
        return max(vals) if vals else None

    return {
        "ltwo_ratio_max": _max("ltwo_ratio"),
        "nablaeltwo_ratio_max": _max("nablaeltwo_ratio"),
        "maxdel_ratio_max": _max("maxdel_ratio"),
        "lbound_ratio_max": _max("lbound_ratio"),
        "grad_norm_ratio_max": _max("grad_norm_ratio"),
        "second_grad_ratio_max": _max("second_grad_ratio"),
        "asserted": ("ltwo_ratio_max", "nablaeltwo_ratio_max"),
    }


def record_field_names() -> list[str]:
    return [f.name for f in fields(DiagnosticsRecord)]
