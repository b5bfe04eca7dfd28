"""Diffusive Lagrangian-map formulation with restarts.

The state is the displacement ``ell`` of the back-to-labels map
``A(x,t) = x + ell(x,t)``, a virtual velocity ``v`` carrying the momentum
history, and the evolved logarithm of ``det(grad A)``.  The physical velocity
is reconstructed from the Weber formula ``u = P((grad A)^T v)``; the physical
vorticity is reachable either as ``curl u`` or through the Cauchy-type
quadratic form applied to the virtual vorticity ``zeta = el_curl(v)``, and the
two must agree — that identity is checked at every output step.

All fields obey advection-diffusion equations sharing the transport operator
``d/dt + u.grad - nu Laplace``; the non-Eulerian geometry enters only through
the connection coefficients ``C[m,k,i] = Q[j,i] d_j d_k ell[m]`` built from
the inverse Jacobian ``Q = (grad A)^{-1}``.

When ``sup_x |grad ell|_F`` reaches the configured threshold ``g`` the map is
restarted from the identity: ``ell <- 0`` and ``v <-`` the Weber velocity
computed just before the reset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from .grid import Grid
from .solvers import FlowState, Formulation, SolverConfig
from .spectral import curl_hat, dealias_hat, grad_hat, leray_hat, zero_mean

__all__ = [
    "InvertibilityError",
    "ELState",
    "LagrangianFlow",
    "DET_FLOOR",
    "second_gradient",
    "grad_map",
    "inverse_grad_map",
    "el_gradient",
    "el_curl",
    "connection_coeffs",
    "weber_velocity",
    "cauchy_action",
    "cauchy_vorticity",
    "virtual_velocity_source",
    "logdet_source",
    "virtual_vorticity_source",
    "connection_source",
    "weber_cauchy_error",
    "logdet_error",
    "zeta_inequality_ratio",
]

# Pointwise |det(grad A)| below this aborts: the restart policy with g < 1
# keeps the Jacobian far from singular, so reaching the floor means the
# configuration (too-large g or dt) is broken, not the physics.
DET_FLOOR = 0.1

_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS3[_i, _j, _k] = 1.0
    _EPS3[_i, _k, _j] = -1.0


class InvertibilityError(RuntimeError):
    """The Lagrangian map lost pointwise invertibility."""

    def __init__(self, min_det: float):
        super().__init__(
            f"min |det(grad A)| = {min_det:.3g} fell below the safety floor {DET_FLOOR}"
        )
        self.min_det = min_det


@dataclass
class ELState(FlowState):
    """Lagrangian-map state: spectral stack [ell, v, logdet(, zeta)].

    The reset window bookkeeping (time integrals of the displacement-gradient
    norms, used by the displacement-bound ratios) lives here because it must
    be zeroed together with ``ell`` at every restart.
    """

    g: float = 0.1
    zeta_mode: str = "derived"
    window_nabla_int: float = 0.0  # int_{t1}^t int |grad ell|^2 dx ds
    window_lap_int: float = 0.0  # int_{t1}^t int |Laplace ell|^2 dx ds
    prev_grad_l2: float = 0.0
    prev_lap_l2: float = 0.0
    zetaineq_max: float = -np.inf
    k0: float = 0.0  # kinetic energy at the start of the run
    ltwo_ratio_max: float = 0.0
    nablaeltwo_ratio_max: float = 0.0

    @property
    def ell_hat(self):
        return self.y[: self.grid.dim]

    @property
    def v_hat(self):
        return self.y[self.grid.dim : 2 * self.grid.dim]

    @property
    def logdet_hat(self):
        return self.y[2 * self.grid.dim]

    @property
    def zeta_hat(self):
        if self.zeta_mode != "evolved":
            return None
        return self.y[2 * self.grid.dim + 1 :]

    def copy(self) -> "ELState":
        dup = ELState(self.grid, self.y.copy(), self.t)
        for name in (
            "t1",
            "restart_count",
            "g",
            "zeta_mode",
            "window_nabla_int",
            "window_lap_int",
            "prev_grad_l2",
            "prev_lap_l2",
            "zetaineq_max",
            "k0",
            "ltwo_ratio_max",
            "nablaeltwo_ratio_max",
        ):
            setattr(dup, name, getattr(self, name))
        dup.restart_events = list(self.restart_events)
        return dup


# ---------------------------------------------------------------- geometry


def second_gradient(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """All second derivatives of a stack of fields: out[c, a, b] = d_a d_b f_c.

    Only the upper-triangular multipliers are transformed; the symmetric
    counterpart is filled by copy.
    """
    ncomp = fh.shape[0]
    pairs = [(a, b) for a in range(grid.dim) for b in range(a, grid.dim)]
    mult = np.stack([-grid.k[a] * grid.k[b] for a, b in pairs])
    phys = grid.to_physical(fh[:, np.newaxis] * mult[np.newaxis])
    out = np.empty((ncomp, grid.dim, grid.dim) + grid.shape)
    for idx, (a, b) in enumerate(pairs):
        out[:, a, b] = phys[:, idx]
        out[:, b, a] = phys[:, idx]
    return out


def grad_map(grid: Grid, ell_hat: np.ndarray, grad_ell: np.ndarray | None = None) -> np.ndarray:
    """Jacobian of the map, grad A = I + grad ell; out[m, i] = d_i A_m."""
    if grad_ell is None:
        grad_ell = grid.to_physical(grad_hat(grid, ell_hat))
    out = grad_ell.copy()
    for m in range(grid.dim):
        out[m, m] += 1.0
    return out


def _det2(m):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def _cross(a, b):
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def inverse_grad_map(grad_a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise inverse Q = (grad A)^{-1} and det(grad A).

    Cofactor-based; raises :class:`InvertibilityError` if any |det| falls
    below ``DET_FLOOR``.
    """
    d = grad_a.shape[0]
    if d == 2:
        det = _det2(grad_a)
        q = np.empty_like(grad_a)
        q[0, 0] = grad_a[1, 1]
        q[0, 1] = -grad_a[0, 1]
        q[1, 0] = -grad_a[1, 0]
        q[1, 1] = grad_a[0, 0]
    else:
        cols = [grad_a[:, i] for i in range(3)]
        # Row i of the unnormalized inverse is c_{i+1} x c_{i+2} (cyclic).
        rows = [_cross(cols[(i + 1) % 3], cols[(i + 2) % 3]) for i in range(3)]
        det = np.einsum("m...,m...->...", cols[0], rows[0])
        q = np.stack(rows)
    min_det = float(np.min(np.abs(det)))
    if min_det < DET_FLOOR:
        raise InvertibilityError(min_det)
    return q / det, det


def el_gradient(grid: Grid, fh: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Map-adapted derivative (nabla^A_i f) = Q[j, i] d_j f, physical output.

    Scalar input gives shape (dim, *grid); a component stack gives
    (ncomp, dim, *grid) with the derivative index last, matching grad_hat.
    """
    gf = grid.to_physical(grad_hat(grid, fh))
    if fh.ndim == grid.dim:
        return np.einsum("ji...,j...->i...", q, gf)
    return np.einsum("ji...,cj...->ci...", q, gf)


def el_curl(grid: Grid, vh: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Map-adapted curl of v: the virtual vorticity (scalar in 2D)."""
    gv = el_gradient(grid, vh, q)  # gv[c, i] = nabla^A_i v_c
    if grid.dim == 2:
        return gv[1, 0] - gv[0, 1]
    return np.stack(
        [
            gv[2, 1] - gv[1, 2],
            gv[0, 2] - gv[2, 0],
            gv[1, 0] - gv[0, 1],
        ]
    )


def connection_coeffs(grid: Grid, ell_hat: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Commutator coefficients C[m, k, i] = Q[j, i] d_j d_k ell_m."""
    d2 = second_gradient(grid, ell_hat)  # d2[m, k, j] = d_k d_j ell_m (symmetric)
    return np.einsum("ji...,mkj...->mki...", q, d2)


def weber_velocity(
    grid: Grid,
    ell_hat: np.ndarray,
    vh: np.ndarray,
    grad_ell: np.ndarray | None = None,
    v_phys: np.ndarray | None = None,
) -> np.ndarray:
    """Velocity from the transposed Jacobian: u = P((grad A)^T v), spectral.

    Zero-mean, divergence-free, dealiased.  At ell = 0 this is just P v.
    """
    if grad_ell is None:
        grad_ell = grid.to_physical(grad_hat(grid, ell_hat))
    if v_phys is None:
        v_phys = grid.to_physical(vh)
    w = v_phys + np.einsum("mi...,m...->i...", grad_ell, v_phys)
    wh = leray_hat(grid, grid.to_spectral(w))
    return zero_mean(grid, dealias_hat(grid, wh))


def cauchy_action(q_vec: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Quadratic form det(M) M^{-1} q evaluated without inverting M.

    3D: component k is the triple product of q with columns k+1, k+2 of M
    (cyclic), finite for singular M.  2D (scalar q): det(M) q.
    """
    if m.shape[0] == 2:
        return _det2(m) * q_vec
    cols = [m[:, i] for i in range(3)]
    return np.stack(
        [
            np.einsum("m...,m...->...", _cross(cols[1], cols[2]), q_vec),
            np.einsum("m...,m...->...", _cross(cols[2], cols[0]), q_vec),
            np.einsum("m...,m...->...", _cross(cols[0], cols[1]), q_vec),
        ]
    )


def cauchy_vorticity(grid: Grid, zeta: np.ndarray, grad_a: np.ndarray) -> np.ndarray:
    """Physical vorticity from the virtual one, pointwise (2D: det * zeta)."""
    return cauchy_action(zeta, grad_a)


# ------------------------------------------------------------ tendency terms


def virtual_velocity_source(c: np.ndarray, grad_v: np.ndarray, nu: float) -> np.ndarray:
    """Commutator forcing 2 nu C[m,k,i] d_k v_m of the virtual velocity."""
    return 2.0 * nu * np.einsum("mki...,mk...->i...", c, grad_v)


def logdet_source(c: np.ndarray, nu: float) -> np.ndarray:
    """Scalar source nu C[i,k,s] C[s,k,i] driving log det(grad A)."""
    return nu * np.einsum("iks...,ski...->...", c, c)


def virtual_vorticity_source(c: np.ndarray, zeta: np.ndarray, grad_zeta: np.ndarray, nu: float):
    """Coefficient terms of the evolved virtual vorticity (3D).

    2 nu C[m,k,m] d_k zeta_q - 2 nu C[q,k,j] d_k zeta_j
    + nu C[m,k,i] C[r,k,j] eps[q,j,i] eps[r,m,p] zeta_p,
    with grad_zeta[q, k] = d_k zeta_q.
    """
    trace_c = np.einsum("mkm...->k...", c)
    t1 = 2.0 * nu * np.einsum("k...,qk...->q...", trace_c, grad_zeta)
    t2 = -2.0 * nu * np.einsum("qkj...,jk...->q...", c, grad_zeta)
    t3 = nu * np.einsum(
        "qji,rmp,mki...,rkj...,p...->q...", _EPS3, _EPS3, c, c, zeta, optimize=True
    )
    return t1 + t2 + t3


def connection_source(
    grid: Grid,
    grad_a: np.ndarray,
    q: np.ndarray,
    c: np.ndarray,
    u_hat: np.ndarray,
    nu: float,
) -> np.ndarray:
    """Source term of the connection-coefficient transport identity.

    -(d_l A_m) nabla^A_i(d_k u_l) - (d_k u_l) C[m,l,i]
    + 2 nu C[j,l,i] d_l C[m,k,j].
    The identity is used as a consistency check only; C itself is always
    recomputed from ell.
    """
    gu = grid.to_physical(grad_hat(grid, u_hat))  # gu[l, k] = d_k u_l
    d2u = second_gradient(grid, u_hat)  # d2u[l, k, j] = d_k d_j u_l
    el_of_gu = np.einsum("ji...,lkj...->lki...", q, d2u)
    term1 = -np.einsum("ml...,lki...->mki...", grad_a, el_of_gu)
    term2 = -np.einsum("lk...,mli...->mki...", gu, c)
    d = grid.dim
    c_hat = grid.to_spectral(c.reshape((d * d * d,) + grid.shape))
    grad_c = grid.to_physical(grad_hat(grid, c_hat)).reshape((d, d, d, d) + grid.shape)
    term3 = 2.0 * nu * np.einsum("jli...,mkjl...->mki...", c, grad_c, optimize=True)
    return term1 + term2 + term3


# ------------------------------------------------------------- global checks


def weber_cauchy_error(grid: Grid, ell_hat: np.ndarray, vh: np.ndarray) -> float:
    """Relative L2 gap between curl(weber u) and the Cauchy-form vorticity.

    Both sides are compared on the resolved (dealiased) modes.
    """
    grad_ell = grid.to_physical(grad_hat(grid, ell_hat))
    grad_a = grad_map(grid, ell_hat, grad_ell)
    q, _ = inverse_grad_map(grad_a)
    uh = weber_velocity(grid, ell_hat, vh, grad_ell)
    omega_left = curl_hat(grid, uh)
    zeta = el_curl(grid, vh, q)
    omega_right = dealias_hat(grid, grid.to_spectral(cauchy_vorticity(grid, zeta, grad_a)))
    num = math.sqrt(float(np.sum(np.abs(omega_left - omega_right) ** 2)))
    den = math.sqrt(float(np.sum(np.abs(omega_left) ** 2)))
    return num / den if den > 0 else 0.0


def logdet_error(grid: Grid, logdet_hat: np.ndarray, det: np.ndarray) -> float:
    """Sup gap between the evolved log-determinant and the recomputed one."""
    s_phys = grid.to_physical(logdet_hat)
    return float(np.max(np.abs(s_phys - np.log(det))))


def zeta_inequality_ratio(grid: Grid, ell_hat: np.ndarray, vh: np.ndarray, nu: float) -> float | None:
    """Largest pointwise ratio of the virtual-enstrophy production identity
    against its Schwartz-inequality bound 17 nu |C|^2 |zeta|^2 (3D, report only).

    The transported derivative of |zeta|^2 reduces to 2 zeta . (coefficient
    terms) - nu |grad zeta|^2, so everything is available instantaneously.
    """
    if grid.dim != 3 or nu == 0.0:
        return None
    grad_a = grad_map(grid, ell_hat)
    q, _ = inverse_grad_map(grad_a)
    c = connection_coeffs(grid, ell_hat, q)
    zeta = el_curl(grid, vh, q)
    zeta_hat = grid.to_spectral(zeta)
    grad_zeta = grid.to_physical(grad_hat(grid, zeta_hat))
    source = virtual_vorticity_source(c, zeta, grad_zeta, nu)
    lhs = 2.0 * np.einsum("q...,q...->...", zeta, source) - nu * np.sum(grad_zeta**2, axis=(0, 1))
    rhs = 17.0 * nu * np.einsum("mki...,mki...->...", c, c) * np.einsum("q...,q...->...", zeta, zeta)
    floor = 1e-12 * float(np.max(rhs, initial=0.0))
    mask = rhs > floor
    if not np.any(mask):
        return None
    return float(np.max(lhs[mask] / rhs[mask]))


# -------------------------------------------------------------- formulation


class LagrangianFlow(Formulation):
    """Displacement/virtual-velocity system on the shared stepper."""

    name = "eulerian_lagrangian"

    def ncomp(self, grid: Grid) -> int:
        return 2 * grid.dim + 1

    def init_state(self, grid: Grid, u0_hat: np.ndarray, config: SolverConfig) -> ELState:
        if config.zeta_mode == "evolved" and grid.dim != 3:
            raise ValueError("evolved virtual vorticity is available in 3D only")
        u0 = zero_mean(grid, dealias_hat(grid, u0_hat.copy()))
        extra = 3 if config.zeta_mode == "evolved" else 0
        y = np.zeros((self.ncomp(grid) + extra,) + grid.shape, dtype=complex)
        y[grid.dim : 2 * grid.dim] = u0
        if extra:
            y[2 * grid.dim + 1 :] = curl_hat(grid, u0)
        k0 = 0.5 * grid.volume * float(np.sum(np.abs(u0) ** 2))
        return ELState(grid, y, g=config.el_g, zeta_mode=config.zeta_mode, k0=k0)

    # -- shared context ----------------------------------------------------

    def prepare(self, grid: Grid, y: np.ndarray, config: SolverConfig) -> dict:
        d = grid.dim
        lh, vh = y[:d], y[d : 2 * d]
        batch = np.concatenate(
            [grad_hat(grid, lh).reshape((d * d,) + grid.shape), vh, lh]
        )
        phys = grid.to_physical(batch)
        grad_ell = phys[: d * d].reshape((d, d) + grid.shape)
        v_phys = phys[d * d : d * d + d]
        ell_phys = phys[d * d + d :]
        uh = weber_velocity(grid, lh, vh, grad_ell, v_phys)
        u_phys = grid.to_physical(uh)
        lh_mag2 = np.sum(np.abs(lh) ** 2, axis=0)
        return {
            "u_hat": uh,
            "u_phys": u_phys,
            "u_max": float(np.max(np.sqrt(np.sum(u_phys**2, axis=0)))),
            "grad_ell": grad_ell,
            "v_phys": v_phys,
            "max_grad_ell": float(np.max(np.sqrt(np.sum(grad_ell**2, axis=(0, 1))))),
            "ell_sup": float(np.max(np.sqrt(np.sum(ell_phys**2, axis=0)))),
            "ell_l2sq": grid.volume * float(np.sum(lh_mag2)),
            "grad_l2": grid.volume * float(np.sum(grid.k2 * lh_mag2)),
            "lap_l2": grid.volume * float(np.sum(grid.k2**2 * lh_mag2)),
        }

    # -- tendency ----------------------------------------------------------

    def rhs(self, grid: Grid, y: np.ndarray, config: SolverConfig, ctx: dict | None = None):
        d = grid.dim
        lh, vh, sh = y[:d], y[d : 2 * d], y[2 * d]
        evolved = config.zeta_mode == "evolved"
        zh = y[2 * d + 1 :] if evolved else None

        if ctx is None:
            batch = np.concatenate([grad_hat(grid, lh).reshape((d * d,) + grid.shape), vh])
            phys = grid.to_physical(batch)
            grad_ell = phys[: d * d].reshape((d, d) + grid.shape)
            v_phys = phys[d * d :]
            uh = weber_velocity(grid, lh, vh, grad_ell, v_phys)
            u = grid.to_physical(uh)
        else:
            grad_ell = ctx["grad_ell"]
            uh = ctx["u_hat"]
            u = ctx["u_phys"]

        q, _ = inverse_grad_map(grad_map(grid, lh, grad_ell))

        # One inverse-transform batch: grad v, the second derivatives of ell
        # (unique pairs), grad logdet, and in evolved mode zeta and grad zeta.
        npairs = d * (d + 1) // 2
        pairs = [(a, b) for a in range(d) for b in range(a, d)]
        pair_mult = np.stack([-grid.k[a] * grid.k[b] for a, b in pairs])
        pieces = [
            grad_hat(grid, vh).reshape((d * d,) + grid.shape),
            (lh[:, np.newaxis] * pair_mult[np.newaxis]).reshape((d * npairs,) + grid.shape),
            grad_hat(grid, sh),
        ]
        if evolved:
            pieces.append(zh)
            pieces.append(grad_hat(grid, zh).reshape((9,) + grid.shape))
        phys = grid.to_physical(np.concatenate(pieces))

        grad_v = phys[: d * d].reshape((d, d) + grid.shape)  # grad_v[m, k] = d_k v_m
        d2_flat = phys[d * d : d * d + d * npairs].reshape((d, npairs) + grid.shape)
        d2l = np.empty((d, d, d) + grid.shape)
        for idx, (a, b) in enumerate(pairs):
            d2l[:, a, b] = d2_flat[:, idx]
            d2l[:, b, a] = d2_flat[:, idx]
        grad_s = phys[d * d + d * npairs : d * d + d * npairs + d]

        c = np.einsum("ji...,mkj...->mki...", q, d2l)

        ell_adv = np.einsum("j...,mj...->m...", u, grad_ell)
        v_tend = -np.einsum("j...,mj...->m...", u, grad_v) + virtual_velocity_source(
            c, grad_v, config.nu
        )
        s_tend = -np.einsum("j...,j...->...", u, grad_s) + logdet_source(c, config.nu)

        out_pieces = [ell_adv, v_tend, s_tend[np.newaxis]]
        if evolved:
            zeta = phys[d * d + d * npairs + d : d * d + d * npairs + d + 3]
            grad_zeta = phys[d * d + d * npairs + d + 3 :].reshape((3, 3) + grid.shape)
            z_tend = -np.einsum("j...,qj...->q...", u, grad_zeta) + virtual_vorticity_source(
                c, zeta, grad_zeta, config.nu
            )
            out_pieces.append(z_tend)
        tend_hat = grid.to_spectral(np.concatenate(out_pieces))
        tend_hat[:d] = -tend_hat[:d] - uh
        return dealias_hat(grid, tend_hat)

    # -- velocity/vorticity extraction --------------------------------------

    def velocity_hat(self, grid: Grid, y: np.ndarray, ctx: dict | None = None):
        if ctx is not None:
            return ctx["u_hat"]
        d = grid.dim
        return weber_velocity(grid, y[:d], y[d : 2 * d])

    # -- restart machinery ---------------------------------------------------

    def post_step(self, state: ELState, ctx: dict, config: SolverConfig, dt: float) -> dict:
        state.window_nabla_int += 0.5 * (state.prev_grad_l2 + ctx["grad_l2"]) * dt
        state.window_lap_int += 0.5 * (state.prev_lap_l2 + ctx["lap_l2"]) * dt
        state.prev_grad_l2 = ctx["grad_l2"]
        state.prev_lap_l2 = ctx["lap_l2"]

        # Per-step displacement-bound ratios (both provably <= 1).
        tau = state.t - state.t1
        if state.k0 > 0 and tau > 0:
            state.ltwo_ratio_max = max(
                state.ltwo_ratio_max, ctx["ell_l2sq"] / (2.0 * state.k0 * tau**2)
            )
            if config.nu > 0:
                state.nablaeltwo_ratio_max = max(
                    state.nablaeltwo_ratio_max,
                    config.nu * state.window_nabla_int / (state.k0 * tau**2),
                )

        if ctx["max_grad_ell"] < state.g:
            return ctx

        d = state.grid.dim
        uh = ctx["u_hat"]  # Weber velocity of the pre-reset (ell, v)
        event = {
            "t": state.t,
            "window": state.t - state.t1,
            "sup_grad_ell": ctx["max_grad_ell"],
        }
        state.y[:d] = 0.0
        state.y[d : 2 * d] = uh
        state.y[2 * d] = 0.0
        if state.zeta_mode == "evolved":
            state.y[2 * d + 1 :] = curl_hat(state.grid, uh)
        state.t1 = state.t
        state.restart_count += 1
        state.window_nabla_int = 0.0
        state.window_lap_int = 0.0
        state.prev_grad_l2 = 0.0
        state.prev_lap_l2 = 0.0
        # Reset-instant consistency through the full general code path.
        event["cauchy_err_after"] = weber_cauchy_error(state.grid, state.y[:d], state.y[d : 2 * d])
        state.restart_events.append(event)

        ctx = dict(ctx)
        ctx["grad_ell"] = np.zeros((d, d) + state.grid.shape)
        ctx["v_phys"] = ctx["u_phys"]
        ctx["max_grad_ell"] = 0.0
        ctx["ell_sup"] = 0.0
        ctx["ell_l2sq"] = 0.0
        ctx["grad_l2"] = 0.0
        ctx["lap_l2"] = 0.0
        return ctx

    # -- reporting -----------------------------------------------------------

    def record_extras(self, state: ELState, ctx: dict, runctx: dict) -> dict:
        grid = state.grid
        d = grid.dim
        lh, vh = state.y[:d], state.y[d : 2 * d]
        nu = runctx["nu"]
        k0 = runctx["k0"]
        horizon = runctx["horizon"]
        out = {
            "max_grad_ell": ctx["max_grad_ell"],
            "restarts": state.restart_count,
            "weber_cauchy_err": weber_cauchy_error(grid, lh, vh),
        }
        grad_a = grad_map(grid, lh, ctx["grad_ell"])
        _, det = inverse_grad_map(grad_a)
        out["logdet_err"] = logdet_error(grid, state.y[2 * d], det)

        tau_w = state.t - state.t1
        if tau_w > 1e-30 and k0 > 0:
            out["ltwo_ratio"] = ctx["ell_l2sq"] / (2.0 * k0 * tau_w**2)
            if nu > 0:
                out["nablaeltwo_ratio"] = nu * state.window_nabla_int / (k0 * tau_w**2)
        if nu > 0:
            k_inf = 2.0 * k0 / nu**2 + math.sqrt(nu * horizon)
            out["maxdel_ratio"] = ctx["ell_sup"] / k_inf
            if tau_w > 1e-30 and k0 > 0:
                denom = k0 * tau_w / nu + k_inf**2 * (2.0 * k0) / nu**2
                out["grad_norm_ratio"] = (ctx["grad_l2"] + nu * state.window_lap_int) / denom
            nnd = diag.nondim_numbers(
                nu, horizon, k0, runctx["enstrophy0"], runctx["enstrophy_max"],
                state.g, runctx["config"].el_s0,
            )
            out.update(self._analytic_ratios(grid, lh, nu, horizon, tau_w, nnd))

        if grid.dim == 3 and nu > 0:
            ratio = zeta_inequality_ratio(grid, lh, vh, nu)
            if ratio is not None:
                state.zetaineq_max = max(state.zetaineq_max, ratio)
        return out

    def _analytic_ratios(self, grid, lh, nu, horizon, tau_w, nnd) -> dict:
        """Report-only analytic-norm displacement ratios with constants := 1.

        The radii are r = (1 - gamma) lambda and r1 = (1 - 2 gamma) lambda
        with lambda = lambda_tilde * sqrt(nu T); the velocity scale U_r is
        converted to physical units by sqrt(nu / T).
        """
        gamma = diag.REPORT_GAMMA
        lam = nnd.lambda_tilde * math.sqrt(nu * horizon)
        r = (1.0 - gamma) * lam
        r1 = (1.0 - 2.0 * gamma) * lam
        u_r = nnd.U_r * math.sqrt(nu / horizon)
        if tau_w <= 1e-30 or not np.isfinite(u_r) or u_r <= 0:
            return {}
        exponent = tau_w * u_r**2 / nu
        if exponent > diag._EXP_LIMIT:
            return {}
        growth = tau_w * u_r * math.exp(exponent)
        out = {}
        try:
            out["lbound_ratio"] = diag.analytic_norm(grid, lh, r, 1) / growth
            grad_l_hat = grad_hat(grid, lh).reshape((grid.dim**2,) + grid.shape)
            bound = growth / (math.e * (r - r1)) if r > r1 else None
            if bound:
                out["second_grad_ratio"] = diag.analytic_norm(grid, grad_l_hat, r1, 1) / bound
        except ValueError:
            pass
        return out

    def run_extras(self, state: ELState, ctx: dict, runctx: dict) -> dict:
        best = state.zetaineq_max
        if state.grid.dim != 3 or not np.isfinite(best):
            best = None
        return {
            "zetaineq_ratio_max": best,
            "ltwo_ratio_max": state.ltwo_ratio_max,
            "nablaeltwo_ratio_max": state.nablaeltwo_ratio_max,
        }
