"""Self-contained property suites runnable from the command line.

Each suite is a list of named checks with hard tolerances; ``run_suites``
prints one machine-readable PASS/FAIL line per check.  The checks mirror the
library's test coverage but run in seconds on a fresh checkout, so they double
as an install smoke test.
"""

import numpy as np

from . import diagnostics as diag
from .grid import Grid
from .initial import make_initial
from .mollifier import Mollifier
from .nearid import (
    cauchy_action,
    cauchy_vorticity,
    connection_coeffs,
    el_curl,
    el_gradient,
    grad_map,
    inverse_grad_map,
    weber_cauchy_error,
    weber_velocity,
)
from .solvers import SolverConfig, run
from .spectral import (
    biot_savart_hat,
    curl_hat,
    dealias_hat,
    grad_hat,
    leray_hat,
    zero_mean,
)

__all__ = ["SUITES", "run_suites", "suite_names"]


class Check:
    def __init__(self, name: str, tol: float):
        self.name = name
        self.tol = tol
        self.value = None
        self.passed = False
        self.note = ""

    def measure(self, value: float):
        self.value = float(value)
        self.passed = self.value <= self.tol
        return self

    def exact(self, ok: bool, note: str = ""):
        self.value = None
        self.passed = bool(ok)
        self.note = note or ("exact" if ok else "mismatch")
        return self

    def line(self, suite: str) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.value is None:
            detail = self.note
        else:
            detail = f"value {self.value:.3e} tol {self.tol:.1e}"
        return f"{status} {suite}.{self.name}: {detail}"


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# ------------------------------------------------------------------ algebra


def _adjugate(m: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    adj = np.empty_like(m)
    for i in range(d):
        for j in range(d):
            minor = np.delete(np.delete(m, j, axis=0), i, axis=1)
            adj[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def suite_algebra() -> list[Check]:
    rng = _rng(2024)
    checks = []

    # planar action is scalar: det(M) q; volumetric action is adj(M) q
    q3 = rng.standard_normal(3)
    worst = max(
        float(abs(cauchy_action(np.float64(1.3), np.eye(2)) - 1.3)),
        float(np.max(np.abs(cauchy_action(q3, np.eye(3)) - q3))),
    )
    checks.append(Check("identity_map", 1e-14).measure(worst))

    worst = 0.0
    for _ in range(100):
        c = rng.uniform(0.2, 2.0)
        qs = rng.uniform(-2, 2)
        worst = max(worst, abs(cauchy_action(qs, c * np.eye(2)) - c**2 * qs))
        qv = rng.uniform(-2, 2, 3)
        got = cauchy_action(qv, c * np.eye(3))
        worst = max(worst, float(np.max(np.abs(got - c**2 * qv))))
    checks.append(Check("det_scaling", 1e-12).measure(worst))

    worst = 0.0
    for trial in range(200):
        q = rng.uniform(-2, 2, 3)
        m = rng.uniform(-2, 2, (3, 3))
        if trial % 4 == 0:  # force rank deficiency
            m[:, -1] = m[:, 0] * rng.uniform(-1, 1)
        gap = np.max(np.abs(cauchy_action(q, m) - _adjugate(m) @ q))
        worst = max(worst, float(gap))
    checks.append(Check("adjugate_including_singular", 1e-12).measure(worst))

    worst = 0.0
    for _ in range(200):
        qs = rng.uniform(-2, 2)
        n1, n2 = rng.uniform(-2, 2, (2, 2, 2))
        lhs = cauchy_action(qs, n1 @ n2)
        rhs = cauchy_action(cauchy_action(qs, n1), n2)
        worst = max(worst, float(abs(lhs - rhs)))
        q = rng.uniform(-2, 2, 3)
        m1, m2 = rng.uniform(-2, 2, (2, 3, 3))
        lhs = cauchy_action(q, m1 @ m2)
        rhs = cauchy_action(cauchy_action(q, m1), m2)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    checks.append(Check("composition_law", 1e-11).measure(worst))

    worst = 0.0
    for _ in range(200):
        q = rng.uniform(-2, 2, 3)
        n = rng.uniform(-2, 2, (3, 3))
        lhs = cauchy_action(q, np.eye(3) + n)
        rhs = (1.0 + np.trace(n)) * q - n @ q + cauchy_action(q, n)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    checks.append(Check("near_identity_expansion", 1e-12).measure(worst))
    return checks


# ----------------------------------------------------------------- spectral


def _band_field(grid: Grid, ncomp: int, seed: int, kmax: int = 4) -> np.ndarray:
    rng = _rng(seed)
    f = rng.standard_normal((ncomp, *grid.shape))
    fh = grid.to_spectral(f)
    fh[..., grid.kmag > kmax] = 0.0
    return zero_mean(grid, fh)


def suite_spectral() -> list[Check]:
    checks = []
    for dim in (2, 3):
        grid = Grid(dim, 32 if dim == 2 else 16)
        fh = _band_field(grid, dim, seed=5 + dim)
        f = grid.to_physical(fh)

        phys = grid.integrate(np.sum(f**2, axis=0))
        spec = grid.volume * float(np.sum(np.abs(fh) ** 2))
        checks.append(
            Check(f"parseval_{dim}d", 1e-12).measure(abs(phys - spec) / max(phys, 1e-300))
        )

        x = grid.x
        s = np.sin(3.0 * x[0])
        sh = grid.to_spectral(s)
        ds = grid.to_physical(grad_hat(grid, sh))[0]
        checks.append(
            Check(f"derivative_{dim}d", 1e-11).measure(np.max(np.abs(ds - 3.0 * np.cos(3.0 * x[0]))))
        )

        phi = np.cos(2.0 * x[0]) * np.sin(x[1 % dim])
        gph = grad_hat(grid, grid.to_spectral(phi))
        checks.append(
            Check(f"leray_kills_gradients_{dim}d", 1e-13).measure(
                np.max(np.abs(leray_hat(grid, gph)))
            )
        )
        uh = leray_hat(grid, fh)
        div = np.einsum("i...,i...->...", 1j * grid.k, uh)
        checks.append(Check(f"leray_divergence_{dim}d", 1e-12).measure(np.max(np.abs(div))))

        wh = curl_hat(grid, uh)
        back = curl_hat(grid, biot_savart_hat(grid, wh)) if dim == 3 else None
        if dim == 3:
            gap = np.max(np.abs(back - wh)) / max(np.max(np.abs(wh)), 1e-300)
            checks.append(Check("biot_savart_inverts_curl_3d", 1e-12).measure(gap))
        else:
            ub = biot_savart_hat(grid, wh)
            gap = np.max(np.abs(ub - uh)) / max(np.max(np.abs(uh)), 1e-300)
            checks.append(Check("biot_savart_inverts_curl_2d", 1e-12).measure(gap))

        cut = dealias_hat(grid, grid.to_spectral(f * f[:1]))
        high = float(np.max(np.abs(cut[..., ~grid.dealias_mask])))
        checks.append(Check(f"dealias_truncates_{dim}d", 0.0).exact(high == 0.0, f"residual {high}"))
    return checks


# ------------------------------------------------------------------- energy


def suite_energy() -> list[Check]:
    checks = []
    grid = Grid(2, 32)
    nu = 0.05
    uh = make_initial(grid, "taylor_green")
    cfg = SolverConfig(nu=nu, dt=2e-3, t_end=0.3, formulation="direct", output_every=0.05)
    res = run(grid, cfg, u0_hat=uh)
    worst = max(
        abs(rec.K - np.pi**2 * np.exp(-4.0 * nu * rec.t)) for rec in res.records
    )
    checks.append(Check("taylor_green_decay_law", 1e-9).measure(worst))

    u0 = make_initial(grid, "random_band", seed=7, kmin=1, kmax=4)
    cfg = SolverConfig(nu=0.02, dt=2e-3, t_end=0.3, formulation="direct", output_every=0.05)
    res = run(grid, cfg, u0_hat=u0)
    k0 = res.records[0].K
    worst = max(abs(rec.budget_residual) for rec in res.records)
    checks.append(Check("energy_budget_closes", 1e-6 * k0).measure(worst))

    m = Mollifier("poisson", 0.4)
    for dim in (2, 3):
        g = Grid(dim, 32 if dim == 2 else 16)
        vh = leray_hat(g, _band_field(g, dim, seed=11 + dim))
        pair = diag.vortex_energy_pair(g, vh, m)
        gap = max(
            abs(pair.energy_physical - pair.energy_spectral)
            / max(abs(pair.energy_physical), 1e-300),
            abs(pair.dissipation_physical - pair.dissipation_spectral)
            / max(abs(pair.dissipation_physical), 1e-300),
        )
        checks.append(Check(f"paired_energy_dual_route_{dim}d", 1e-12).measure(gap))
    return checks


# ------------------------------------------------------------------- cauchy


def _smooth_displacement(grid: Grid, amp: float, seed: int):
    rng = _rng(seed)
    f = rng.standard_normal((grid.dim, *grid.shape))
    fh = grid.to_spectral(f)
    fh[..., grid.kmag > 2] = 0.0
    fh = zero_mean(grid, fh)
    sup = np.max(np.abs(grid.to_physical(grad_hat(grid, fh))))
    return fh * (amp / sup)


def suite_cauchy() -> list[Check]:
    checks = []
    for dim in (2, 3):
        grid = Grid(dim, 32 if dim == 2 else 16)
        lh = _smooth_displacement(grid, 0.05, seed=3 + dim)
        vh = leray_hat(grid, _band_field(grid, dim, seed=17 + dim))
        checks.append(
            Check(f"weber_cauchy_gap_{dim}d", 1e-6).measure(weber_cauchy_error(grid, lh, vh))
        )

    grid = Grid(3, 32)
    lh = _smooth_displacement(grid, 0.05, seed=23)
    q, _ = inverse_grad_map(grad_map(grid, lh))
    c = connection_coeffs(grid, lh, q)
    sh = grid.to_spectral(np.sin(grid.x[0]) * np.cos(2.0 * grid.x[1]))
    elg = el_gradient(grid, sh, q)
    dk_of_elg = grid.to_physical(grad_hat(grid, grid.to_spectral(elg)))  # (i, k, ...)
    el_of_dk = el_gradient(grid, grad_hat(grid, sh), q)  # (k, i, ...)
    lhs = np.swapaxes(el_of_dk, 0, 1) - dk_of_elg
    rhs = np.einsum("mki...,m...->ik...", c, elg)
    scale = max(np.max(np.abs(rhs)), 1e-300)
    checks.append(Check("commutator_identity", 1e-6).measure(np.max(np.abs(lhs - rhs)) / scale))

    grid = Grid(2, 32)
    u0 = make_initial(grid, "random_band", seed=9, kmin=1, kmax=3)
    cfg = SolverConfig(nu=0.05, dt=1e-3, t_end=0.05, formulation="eulerian_lagrangian")
    res = run(grid, cfg, u0_hat=u0)
    y = res.state.y
    lh, vh = y[:2], y[2:4]
    ga = grad_map(grid, lh)
    q, _ = inverse_grad_map(ga)
    uh = weber_velocity(grid, lh, vh)
    w = grid.to_physical(curl_hat(grid, uh))
    zeta = el_curl(grid, vh, q)
    gap = np.max(np.abs(w - cauchy_vorticity(grid, zeta, ga))) / max(np.max(np.abs(w)), 1e-300)
    checks.append(Check("planar_vorticity_is_det_weighted", 1e-8).measure(gap))
    return checks


# -------------------------------------------------------------- consistency


def suite_consistency() -> list[Check]:
    checks = []
    grid = Grid(2, 32)
    u0 = make_initial(grid, "random_band", seed=31, kmin=1, kmax=4)

    base = dict(nu=0.02, dt=2e-3, t_end=0.05)
    res_d = run(grid, SolverConfig(formulation="direct", **base), u0_hat=u0)
    res_m = run(
        grid,
        SolverConfig(formulation="mollified", mollifier=Mollifier("poisson", 0.0), **base),
        u0_hat=u0,
    )
    checks.append(
        Check("zero_width_filter_matches_direct", 0.0).exact(
            np.array_equal(res_d.state.y, res_m.state.y),
            "bitwise" if np.array_equal(res_d.state.y, res_m.state.y) else "states differ",
        )
    )

    m = Mollifier("poisson", 0.3)
    res_v = run(grid, SolverConfig(formulation="vortex", mollifier=m, **base), u0_hat=u0)
    res_c = run(grid, SolverConfig(formulation="cotangent", mollifier=m, **base), u0_hat=u0)
    wc = curl_hat(grid, res_c.state.y)
    scale = max(np.max(np.abs(res_v.state.y)), 1e-300)
    checks.append(
        Check("cotangent_curl_tracks_vorticity_form", 1e-12).measure(
            np.max(np.abs(wc - res_v.state.y)) / scale
        )
    )

    cfg = SolverConfig(nu=0.0, dt=1e-3, t_end=0.05, formulation="eulerian_lagrangian", cfl=10.0)
    res = run(grid, cfg, u0_hat=u0)
    s_phys = grid.to_physical(res.state.y[4])
    checks.append(Check("inviscid_logdet_stays_zero", 1e-12).measure(np.max(np.abs(s_phys))))

    nu = 0.05
    m = Mollifier("poisson", 0.5)
    uh = make_initial(grid, "taylor_green")
    worst = 0.0
    for formulation in ("direct", "mollified", "vortex", "cotangent"):
        kw = {"mollifier": m} if formulation != "direct" else {}
        res = run(
            grid,
            SolverConfig(nu=nu, dt=2e-3, t_end=0.1, formulation=formulation, **kw),
            u0_hat=uh,
        )
        rec = res.records[-1]
        worst = max(worst, abs(rec.K - np.pi**2 * np.exp(-4.0 * nu * rec.t)))
    checks.append(Check("taylor_green_shared_by_formulations", 1e-10).measure(worst))
    return checks


SUITES = {
    "algebra": suite_algebra,
    "spectral": suite_spectral,
    "energy": suite_energy,
    "cauchy": suite_cauchy,
    "consistency": suite_consistency,
}


def suite_names() -> list[str]:
    return list(SUITES)


def run_suites(names, out=None) -> bool:
    """Execute the named suites, print PASS/FAIL lines, return overall pass."""
    import sys

    out = out or sys.stdout
    all_ok = True
    for name in names:
        for check in SUITES[name]():
            print(check.line(name), file=out)
            all_ok = all_ok and check.passed
    return all_ok
