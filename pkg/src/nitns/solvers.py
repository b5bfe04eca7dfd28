"""Time stepping for the periodic incompressible-flow formulations.

Four systems share one integrating-factor Runge-Kutta driver: the direct
velocity equation, its mollified variant, the vorticity (vortex-method) form,
and the cotangent form that evolves the impulse-like vector w with P w the
velocity.  The diffusive Lagrangian-map formulation plugs into the same
driver from :mod:`nitns.nearid`.

The stiff viscous term is applied exactly through spectral multiplication by
``exp(-nu |k|^2 dt)``; only the projected advection terms are integrated
explicitly (Lawson's method).  Nonlinear tendencies are always dealiased.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .grid import Grid
from .mollifier import Mollifier
from .spectral import (
    biot_savart_hat,
    curl_hat,
    dealias_hat,
    grad_hat,
    leray_hat,
    zero_mean,
)

__all__ = [
    "BlowupError",
    "SolverConfig",
    "FlowState",
    "RunResult",
    "Formulation",
    "DirectFlow",
    "MollifiedFlow",
    "VortexFlow",
    "CotangentFlow",
    "make_formulation",
    "lawson_step",
    "run",
    "FORMULATIONS",
    "SCHEMES",
]

FORMULATIONS = ("direct", "mollified", "vortex", "cotangent", "eulerian_lagrangian")
SCHEMES = ("RK2", "RK4")

# Enstrophy growth beyond this factor of its initial value aborts the run.
_BLOWUP_FACTOR = 1e12


class BlowupError(RuntimeError):
    """Raised when a trajectory leaves the realm of finite, resolvable fields.

    Carries the failure time and the last good state so callers can persist
    a snapshot before giving up.
    """

    def __init__(self, t: float, reason: str, state: "FlowState | None" = None):
        super().__init__(f"blow-up at t={t:.6g}: {reason}")
        self.t = t
        self.reason = reason
        self.state = state


@dataclass
class SolverConfig:
    """Everything the time integrator needs to advance one trajectory."""

    nu: float
    dt: float
    t_end: float
    formulation: str = "direct"
    mollifier: Mollifier | None = None
    scheme: str = "RK4"
    cfl: float = 0.5
    output_every: float = 0.0  # 0 -> record every step
    el_g: float = 0.1  # displacement-gradient reset threshold
    el_s0: float = 0.25  # transience fraction for the analyticity radius
    zeta_mode: str = "derived"  # or "evolved" (3D Lagrangian runs only)

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.formulation not in FORMULATIONS:
            raise ValueError(
                f"unknown formulation {self.formulation!r}; choose from {FORMULATIONS}"
            )
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.formulation in ("mollified", "vortex", "cotangent") and self.mollifier is None:
            raise ValueError(f"formulation {self.formulation!r} requires a mollifier")
        if not 0 < self.el_g < 1:
            raise ValueError(f"el_g must lie in (0, 1), got {self.el_g}")
        if self.zeta_mode not in ("derived", "evolved"):
            raise ValueError(f"zeta_mode must be 'derived' or 'evolved', got {self.zeta_mode!r}")


@dataclass
class FlowState:
    """Spectral state stack plus trajectory bookkeeping.

    ``y`` holds the evolved components: the velocity (direct/mollified), the
    vorticity (vortex; one component in 2D), the cotangent vector w, or the
    Lagrangian stack handled by the subclass in :mod:`nitns.nearid`.
    """

    grid: Grid
    y: np.ndarray
    t: float = 0.0
    t1: float = 0.0  # start of the current reset window
    restart_count: int = 0
    restart_events: list = field(default_factory=list)

    def copy(self) -> "FlowState":
        dup = self.__class__(self.grid, self.y.copy(), self.t)
        dup.t1 = self.t1
        dup.restart_count = self.restart_count
        dup.restart_events = list(self.restart_events)
        return dup


@dataclass
class RunResult:
    """Trajectory output: diagnostics rows, final state, derived numbers."""

    records: list
    state: FlowState
    nondim: diag.NondimNumbers | None
    restart_events: list
    extras: dict
    wall_time: float
    field_history: list | None = None


# ------------------------------------------------------------- formulations


class Formulation:
    """Shared interface: a spectral state stack plus its tendency.

    ``prepare`` builds the per-step context (velocity in both spaces and any
    formulation extras) that the first Runge-Kutta stage, the CFL clamp and
    the diagnostics all share, so each step pays for those transforms once.
    """

    name = "?"

    def ncomp(self, grid: Grid) -> int:
        raise NotImplementedError

    def init_state(self, grid: Grid, u0_hat: np.ndarray, config: SolverConfig) -> FlowState:
        raise NotImplementedError

    def prepare(self, grid: Grid, y: np.ndarray, config: SolverConfig) -> dict:
        raise NotImplementedError

    def rhs(self, grid: Grid, y: np.ndarray, config: SolverConfig, ctx: dict | None = None):
        raise NotImplementedError

    def velocity_hat(self, grid: Grid, y: np.ndarray, ctx: dict | None = None) -> np.ndarray:
        raise NotImplementedError

    def vorticity_hat(self, grid: Grid, y: np.ndarray, ctx: dict | None = None) -> np.ndarray:
        uh = ctx["u_hat"] if ctx is not None else self.velocity_hat(grid, y)
        return curl_hat(grid, uh)

    def post_step(self, state: FlowState, ctx: dict, config: SolverConfig, dt: float) -> dict:
        """Hook run after each accepted step (restart logic lives here)."""
        return ctx

    def record_extras(self, state: FlowState, ctx: dict, runctx: dict) -> dict:
        return {}


def _advect(grid: Grid, vel_phys: np.ndarray, field_hat: np.ndarray) -> np.ndarray:
    """(vel . grad) field, returned as physical samples."""
    gf = grid.to_physical(grad_hat(grid, field_hat))
    if field_hat.ndim == grid.dim:  # scalar
        return np.einsum("j...,j...->...", vel_phys, gf)
    return np.einsum("j...,cj...->c...", vel_phys, gf)


def _sup_speed(u_phys: np.ndarray) -> float:
    return float(np.max(np.sqrt(np.sum(u_phys**2, axis=0))))


class DirectFlow(Formulation):
    """Velocity form: tendency P(-u . grad u), pressure never formed."""

    name = "direct"

    def ncomp(self, grid):
        return grid.dim

    def init_state(self, grid, u0_hat, config):
        return FlowState(grid, zero_mean(grid, dealias_hat(grid, u0_hat.copy())))

    def _advecting(self, grid, uh, config):
        return uh

    def prepare(self, grid, y, config):
        u = grid.to_physical(y)
        ctx = {"u_hat": y, "u_phys": u, "u_max": _sup_speed(u)}
        mh = self._advecting(grid, y, config)
        ctx["adv_hat"] = mh
        ctx["adv_phys"] = u if mh is y else grid.to_physical(mh)
        return ctx

    def rhs(self, grid, y, config, ctx=None):
        if ctx is not None:
            adv = ctx["adv_phys"]
        else:
            adv = grid.to_physical(self._advecting(grid, y, config))
        nl = _advect(grid, adv, y)
        out = -leray_hat(grid, grid.to_spectral(nl))
        return zero_mean(grid, dealias_hat(grid, out))

    def velocity_hat(self, grid, y, ctx=None):
        return y


class MollifiedFlow(DirectFlow):
    """As direct, but the advecting velocity is filtered: P(-[u] . grad u)."""

    name = "mollified"

    def _advecting(self, grid, uh, config):
        return config.mollifier.apply_hat(grid, uh)


class VortexFlow(Formulation):
    """Vorticity form advected and stretched by the filtered velocity."""

    name = "vortex"

    def ncomp(self, grid):
        return grid.dim if grid.dim == 3 else 1

    def init_state(self, grid, u0_hat, config):
        wh = curl_hat(grid, zero_mean(grid, dealias_hat(grid, u0_hat.copy())))
        if grid.dim == 2:
            wh = wh[np.newaxis]
        return FlowState(grid, wh)

    def _state_omega(self, grid, y):
        return y[0] if grid.dim == 2 else y

    def prepare(self, grid, y, config):
        uh = biot_savart_hat(grid, self._state_omega(grid, y))
        u = grid.to_physical(uh)
        mh = config.mollifier.apply_hat(grid, uh)
        return {
            "u_hat": uh,
            "u_phys": u,
            "u_max": _sup_speed(u),
            "adv_hat": mh,
            "adv_phys": grid.to_physical(mh),
        }

    def rhs(self, grid, y, config, ctx=None):
        wh = self._state_omega(grid, y)
        if ctx is None:
            ctx = self.prepare(grid, y, config)
        adv = ctx["adv_phys"]
        tend = -_advect(grid, adv, wh)
        if grid.dim == 3:
            w = grid.to_physical(wh)
            gm = grid.to_physical(grad_hat(grid, ctx["adv_hat"]))  # gm[c,d] = d_d [u]_c
            tend = tend + np.einsum("j...,cj...->c...", w, gm)
        out = grid.to_spectral(tend)
        if grid.dim == 2:
            out = out[np.newaxis]
        return zero_mean(grid, dealias_hat(grid, out))

    def velocity_hat(self, grid, y, ctx=None):
        if ctx is not None:
            return ctx["u_hat"]
        return biot_savart_hat(grid, self._state_omega(grid, y))

    def vorticity_hat(self, grid, y, ctx=None):
        return self._state_omega(grid, y)


class CotangentFlow(Formulation):
    """Cotangent form: w carries the velocity as P w and obeys
    dw/dt = -[u] . grad w - (grad [u])^T w with [u] = filter(P w)."""

    name = "cotangent"

    def ncomp(self, grid):
        return grid.dim

    def init_state(self, grid, u0_hat, config):
        # w0 = u0 satisfies the constraint P w0 = u0 for divergence-free u0.
        return FlowState(grid, zero_mean(grid, dealias_hat(grid, u0_hat.copy())))

    def prepare(self, grid, y, config):
        uh = leray_hat(grid, y)
        mh = config.mollifier.apply_hat(grid, uh)
        u = grid.to_physical(uh)
        return {
            "u_hat": uh,
            "u_phys": u,
            "u_max": _sup_speed(u),
            "adv_hat": mh,
            "adv_phys": grid.to_physical(mh),
        }

    def rhs(self, grid, y, config, ctx=None):
        if ctx is None:
            ctx = self.prepare(grid, y, config)
        adv = ctx["adv_phys"]
        gm = grid.to_physical(grad_hat(grid, ctx["adv_hat"]))
        w = grid.to_physical(y)
        tend = -_advect(grid, adv, y) - np.einsum("mi...,m...->i...", gm, w)
        return dealias_hat(grid, grid.to_spectral(tend))

    def velocity_hat(self, grid, y, ctx=None):
        if ctx is not None:
            return ctx["u_hat"]
        return leray_hat(grid, y)

    def vorticity_hat(self, grid, y, ctx=None):
        # curl annihilates the gradient part, so the raw w suffices.
        return curl_hat(grid, y)


def make_formulation(config: SolverConfig) -> Formulation:
    if config.formulation == "direct":
        return DirectFlow()
    if config.formulation == "mollified":
        return MollifiedFlow()
    if config.formulation == "vortex":
        return VortexFlow()
    if config.formulation == "cotangent":
        return CotangentFlow()
    from .nearid import LagrangianFlow  # deferred: nearid imports this module

    return LagrangianFlow()


# ------------------------------------------------------------ time stepping


def _half_factor(grid: Grid, nu: float, dt: float) -> np.ndarray:
    """exp(-nu |k|^2 dt / 2), the half-step viscous multiplier."""
    if nu == 0.0:
        return np.ones(grid.shape)
    return np.exp(-0.5 * nu * grid.k2 * dt)


def lawson_step(
    grid: Grid,
    y: np.ndarray,
    rhs,
    nu: float,
    dt: float,
    scheme: str,
    ctx: dict | None = None,
) -> np.ndarray:
    """One integrating-factor Runge-Kutta step.

    ``rhs(y, ctx)`` must return only the non-stiff tendency; the viscous
    semigroup is applied exactly. ``ctx`` is forwarded to the first stage
    only, where the state matches the context it was built from.
    """
    e1 = _half_factor(grid, nu, dt)
    e2 = e1 * e1
    if scheme == "RK2":
        k1 = rhs(y, ctx)
        k2 = rhs(e2 * (y + dt * k1), None)
        return e2 * y + (0.5 * dt) * (e2 * k1 + k2)
    if scheme == "RK4":
        k1 = rhs(y, ctx)
        k2 = rhs(e1 * (y + (0.5 * dt) * k1), None)
        k3 = rhs(e1 * y + (0.5 * dt) * k2, None)
        k4 = rhs(e2 * y + dt * (e1 * k3), None)
        return e2 * y + (dt / 6.0) * (e2 * k1 + 2.0 * e1 * (k2 + k3) + k4)
    raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")


# -------------------------------------------------------------- run driver


def _check_finite(state: FlowState, enstrophy_now: float, enstrophy0: float):
    if not np.all(np.isfinite(state.y)):
        raise BlowupError(state.t, "non-finite spectral coefficient", state)
    floor = max(enstrophy0, 1e-300)
    if enstrophy_now > _BLOWUP_FACTOR * floor:
        raise BlowupError(
            state.t,
            f"enstrophy grew past {_BLOWUP_FACTOR:.0e} times its initial value",
            state,
        )


def _paired_sums(grid: Grid, uh: np.ndarray, m: Mollifier) -> tuple[float, float]:
    """Filtered energy/dissipation sums 1/2 int u.[u] and int tr{grad u (grad [u])^T}.

    Evaluated spectrally: both reduce to kernel-weighted Parseval sums, so no
    transforms are needed on the per-step path.
    """
    jk = m.multiplier(grid)
    mag2 = np.sum(np.abs(uh) ** 2, axis=0)
    e = 0.5 * grid.volume * float(np.sum(jk * mag2))
    d = grid.volume * float(np.sum(jk * grid.k2 * mag2))
    return e, d


def _instantaneous(grid, form, state, ctx, config) -> dict:
    """Cheap per-step scalars shared by the accumulators and blow-up guard."""
    wh = form.vorticity_hat(grid, state.y, ctx)
    vals = {
        "eps": diag.dissipation_rate(grid, ctx["u_hat"], config.nu),
        "enstrophy": diag.enstrophy(grid, wh),
        "u_max": ctx["u_max"],
    }
    if config.formulation in ("vortex", "cotangent"):
        e, d = _paired_sums(grid, ctx["u_hat"], config.mollifier)
        vals["paired_e"] = e
        vals["paired_d"] = d
    return vals


def _build_record(grid, form, state, ctx, config, runctx, accum) -> diag.DiagnosticsRecord:
    uh = ctx["u_hat"]
    wh = form.vorticity_hat(grid, state.y, ctx)
    kin = diag.kinetic_energy(grid, uh)
    w_phys = grid.to_physical(wh)
    alpha, mask = diag.stretching_alpha(grid, uh, wh)
    alpha_max = float(np.max(alpha[mask], initial=0.0)) if grid.dim == 3 else 0.0
    gev = None
    if config.nu > 0 and state.t >= runctx["gevrey_start"]:
        try:
            gev = diag.gevrey_y(
                grid, wh, config.nu, runctx["horizon"], runctx["gevrey_start"], state.t
            )
        except ValueError:
            gev = None
    nnd = None
    if config.nu > 0:
        nnd = diag.nondim_numbers(
            config.nu,
            runctx["horizon"],
            runctx["k0"],
            runctx["enstrophy0"],
            runctx["enstrophy_max"],
            config.el_g,
            config.el_s0,
        )
    rec = diag.DiagnosticsRecord(
        t=state.t,
        K=kin,
        eps=diag.dissipation_rate(grid, uh, config.nu),
        enstrophy=diag.enstrophy(grid, wh),
        omega_l1=diag.vorticity_l1(grid, w_phys),
        dir_diss=diag.direction_dissipation(grid, wh),
        alpha_max=alpha_max,
        u_linf=ctx["u_max"],
        suf1=accum["suf1"],
        suf2=accum["suf2"],
        maxu=accum["maxu"],
        y_gevrey=gev,
        budget_residual=kin + accum["eps_int"] - runctx["k0"],
        G=nnd.G if nnd else None,
        rho=nnd.rho if nnd else None,
        tau=nnd.tau if nnd else None,
        pointwise_slack=diag.pointwise_bound_slack(grid, uh, wh),
        interp_ratio=diag.sup_interpolation_ratio(grid, uh, wh),
    )
    if config.formulation in ("vortex", "cotangent"):
        try:
            pair = diag.vortex_energy_pair(grid, uh, config.mollifier)
            rec.paired_energy = pair.energy_physical
            rec.paired_energy_spectral = pair.energy_spectral
            rec.paired_dissipation = pair.dissipation_physical
            rec.paired_dissipation_spectral = pair.dissipation_spectral
        except ValueError as exc:
            runctx.setdefault("notes", []).append(
                f"t={state.t:.6g}: paired-energy dual path skipped ({exc})"
            )
        rec.paired_budget_residual = (
            _paired_sums(grid, uh, config.mollifier)[0]
            + config.nu * accum["paired_int"]
            - runctx["paired_e0"]
        )
    for key, value in form.record_extras(state, ctx, runctx).items():
        setattr(rec, key, value)
    return rec


def run(
    grid: Grid,
    config: SolverConfig,
    u0_hat: np.ndarray | None = None,
    state: FlowState | None = None,
    keep_fields: bool = False,
    on_record=None,
) -> RunResult:
    """Advance a trajectory to ``t_end``, emitting diagnostics records.

    Either an initial velocity (spectral, stacked components) or a prepared
    ``FlowState`` must be given. Deterministic for a fixed configuration.
    Raises :class:`BlowupError` carrying the last finite state on failure.
    """
    t_start = time.perf_counter()
    form = make_formulation(config)
    if state is None:
        if u0_hat is None:
            raise ValueError("run needs an initial velocity or a prepared state")
        state = form.init_state(grid, u0_hat, config)

    from .nearid import InvertibilityError  # local to avoid an import cycle

    ctx = form.prepare(grid, state.y, config)
    wh0 = form.vorticity_hat(grid, state.y, ctx)
    runctx = {
        "k0": diag.kinetic_energy(grid, ctx["u_hat"]),
        "enstrophy0": diag.enstrophy(grid, wh0),
        "enstrophy_max": diag.enstrophy(grid, wh0),
        "gevrey_start": 0.05 * config.t_end,
        "horizon": max(config.t_end, config.dt),
        "nu": config.nu,
        "config": config,
    }
    accum = {"eps_int": 0.0, "suf1": 0.0, "suf2": 0.0, "maxu": 0.0, "paired_int": 0.0}
    if config.formulation in ("vortex", "cotangent"):
        runctx["paired_e0"] = _paired_sums(grid, ctx["u_hat"], config.mollifier)[0]
    vals = _instantaneous(grid, form, state, ctx, config)
    _check_finite(state, vals["enstrophy"], runctx["enstrophy0"])

    records = [_build_record(grid, form, state, ctx, config, runctx, accum)]
    if on_record:
        on_record(state, ctx, records[-1])
    history = [(state.t, ctx["u_hat"].copy())] if keep_fields else None

    warned_cfl = False
    next_record = config.output_every if config.output_every > 0 else None
    eps_t = 1e-12 * max(config.t_end, 1.0)

    def staged_rhs(yy, cc):
        return form.rhs(grid, yy, config, cc)

    while state.t < config.t_end - eps_t:
        dt_step = min(config.dt, config.t_end - state.t)
        if vals["u_max"] > 0:
            dt_cfl = config.cfl * grid.h / vals["u_max"]
            if dt_cfl < dt_step:
                if not warned_cfl:
                    warnings.warn(
                        f"time step {dt_step:.3g} exceeds the advective bound; "
                        f"reduced to {dt_cfl:.3g} (cfl={config.cfl})",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                    warned_cfl = True
                dt_step = dt_cfl

        # An invertibility trip means the step ran the Jacobian out of its
        # safe region: roll back, halve, retry a few times before giving up.
        for attempt in range(5):
            try:
                y_new = lawson_step(grid, state.y, staged_rhs, config.nu, dt_step, config.scheme, ctx)
                break
            except InvertibilityError:
                if attempt == 4:
                    raise
                dt_step *= 0.5

        state.y = y_new
        state.t += dt_step
        ctx = form.prepare(grid, state.y, config)
        vals_new = _instantaneous(grid, form, state, ctx, config)
        _check_finite(state, vals_new["enstrophy"], runctx["enstrophy0"])

        accum["eps_int"] += 0.5 * (vals["eps"] + vals_new["eps"]) * dt_step
        accum["suf1"] += 0.5 * (vals["enstrophy"] ** 2 + vals_new["enstrophy"] ** 2) * dt_step
        accum["suf2"] += 0.5 * (vals["u_max"] ** 2 + vals_new["u_max"] ** 2) * dt_step
        accum["maxu"] += 0.5 * (vals["u_max"] + vals_new["u_max"]) * dt_step
        if "paired_d" in vals_new:
            accum["paired_int"] += 0.5 * (vals["paired_d"] + vals_new["paired_d"]) * dt_step
        runctx["enstrophy_max"] = max(runctx["enstrophy_max"], vals_new["enstrophy"])
        vals = vals_new

        ctx = form.post_step(state, ctx, config, dt_step)

        due = next_record is not None and state.t >= next_record - eps_t
        last = state.t >= config.t_end - eps_t
        if due or last or next_record is None:
            records.append(_build_record(grid, form, state, ctx, config, runctx, accum))
            if on_record:
                on_record(state, ctx, records[-1])
            if keep_fields:
                history.append((state.t, ctx["u_hat"].copy()))
            while due and next_record <= state.t + eps_t:
                next_record += config.output_every

    nnd = None
    if config.nu > 0:
        nnd = diag.nondim_numbers(
            config.nu,
            runctx["horizon"],
            runctx["k0"],
            runctx["enstrophy0"],
            runctx["enstrophy_max"],
            config.el_g,
            config.el_s0,
        )
    extras = {"displacement_report": diag.displacement_bound_report(records)}
    if "notes" in runctx:
        extras["notes"] = runctx["notes"]
    if hasattr(form, "run_extras"):
        extras.update(form.run_extras(state, ctx, runctx))
    return RunResult(
        records=records,
        state=state,
        nondim=nnd,
        restart_events=state.restart_events,
        extras=extras,
        wall_time=time.perf_counter() - t_start,
        field_history=history,
    )
