"""Binary state snapshots.

Layout: an 84-byte header (magic ``NITNS001``, format version, grid shape,
physical parameters, clock, and a formulation tag) followed by the state
fields as little-endian 64-bit floats, row-major, in physical space.  The
payload order is fixed per formulation: velocity components for the direct
and mollified equations, vorticity for the vortex form, the covector field
for the cotangent form, and displacement + virtual velocity for the
Eulerian-Lagrangian system.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .solvers import FORMULATIONS, FlowState, SolverConfig, make_formulation
from .spectral import dealias_hat, zero_mean

__all__ = ["Snapshot", "SnapshotError", "read_snapshot", "write_snapshot", "state_to_snapshot", "snapshot_to_state"]

MAGIC = b"NITNS001"
VERSION = 1
_TAG_BYTES = 24
_HEADER = struct.Struct("<8sIII5d24s")  # magic, version, dim, n, nu, delta, g, t, t1, tag


class SnapshotError(RuntimeError):
    """Raised for malformed snapshot files."""


def _field_count(formulation: str, dim: int) -> int:
    if formulation in ("direct", "mollified", "cotangent"):
        return dim
    if formulation == "vortex":
        return 1 if dim == 2 else 3
    if formulation == "eulerian_lagrangian":
        return 2 * dim
    raise SnapshotError(f"unknown formulation tag {formulation!r}")


@dataclass
class Snapshot:
    formulation: str
    dim: int
    n: int
    nu: float
    delta: float  # mollifier width; 0 when no mollifier is attached
    g: float  # restart threshold (Eulerian-Lagrangian only, else 0)
    t: float
    t1: float  # start of the current restart window (0 for other forms)
    fields: np.ndarray  # (nfields, n, ...) physical values, float64


def write_snapshot(path, snap: Snapshot) -> None:
    if snap.formulation not in FORMULATIONS:
        raise SnapshotError(f"unknown formulation tag {snap.formulation!r}")
    expected = (_field_count(snap.formulation, snap.dim),) + (snap.n,) * snap.dim
    if snap.fields.shape != expected:
        raise SnapshotError(f"field block has shape {snap.fields.shape}, expected {expected}")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        snap.dim,
        snap.n,
        snap.nu,
        snap.delta,
        snap.g,
        snap.t,
        snap.t1,
        snap.formulation.encode("ascii").ljust(_TAG_BYTES, b"\0"),
    )
    payload = np.ascontiguousarray(snap.fields, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise SnapshotError("truncated snapshot: header incomplete")
    magic, version, dim, n, nu, delta, g, t, t1, tag = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}; not a snapshot file")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version} (expected {VERSION})")
    formulation = tag.rstrip(b"\0").decode("ascii")
    if formulation not in FORMULATIONS:
        raise SnapshotError(f"unknown formulation tag {formulation!r}")
    if dim not in (2, 3) or n < 8:
        raise SnapshotError(f"implausible grid header dim={dim} n={n}")
    nfields = _field_count(formulation, dim)
    count = nfields * n**dim
    expected = _HEADER.size + count * 8
    if len(blob) != expected:
        raise SnapshotError(
            f"payload length {len(blob) - _HEADER.size} does not match header "
            f"({count * 8} bytes for {nfields} fields on n={n}^{dim})"
        )
    fields = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(
        (nfields,) + (n,) * dim
    )
    return Snapshot(formulation, dim, n, nu, delta, g, t, t1, fields.copy())


# -------------------------------------------------------- state conversion


def state_to_snapshot(grid: Grid, state: FlowState, config: SolverConfig) -> Snapshot:
    d = grid.dim
    if config.formulation == "eulerian_lagrangian":
        raw = grid.to_physical(state.y[: 2 * d])
    else:
        raw = grid.to_physical(state.y)
    return Snapshot(
        formulation=config.formulation,
        dim=d,
        n=grid.n,
        nu=config.nu,
        delta=config.mollifier.delta if config.mollifier is not None else 0.0,
        g=config.el_g if config.formulation == "eulerian_lagrangian" else 0.0,
        t=state.t,
        t1=state.t1 if config.formulation == "eulerian_lagrangian" else 0.0,
        fields=np.asarray(raw, dtype=np.float64),
    )


def snapshot_to_state(grid: Grid, snap: Snapshot, config: SolverConfig) -> FlowState:
    """Rebuild a solver state from stored fields.

    Means are preserved for the covector and displacement fields (they carry
    dynamical content mid-run); the Eulerian-Lagrangian scalar bookkeeping
    (log-determinant, evolved virtual vorticity) is reconstructed from the
    stored displacement and virtual velocity rather than persisted.
    """
    if snap.formulation != config.formulation:
        raise SnapshotError(
            f"snapshot holds {snap.formulation!r} fields; configuration wants "
            f"{config.formulation!r}"
        )
    if (snap.dim, snap.n) != (grid.dim, grid.n):
        raise SnapshotError(
            f"snapshot grid {snap.dim}D n={snap.n} does not match {grid.dim}D n={grid.n}"
        )
    d = grid.dim
    fh = dealias_hat(grid, grid.to_spectral(snap.fields))
    if config.formulation == "eulerian_lagrangian":
        from .nearid import el_curl, grad_map, inverse_grad_map, weber_velocity

        form = make_formulation(config)
        state = form.init_state(grid, np.zeros_like(fh[:d]), config)
        state.y[:d] = fh[:d]
        state.y[d : 2 * d] = fh[d : 2 * d]
        q, det = inverse_grad_map(grad_map(grid, state.y[:d]))
        state.y[2 * d] = dealias_hat(grid, grid.to_spectral(np.log(det)))
        if config.zeta_mode == "evolved":
            zeta = el_curl(grid, state.y[d : 2 * d], q)
            state.y[2 * d + 1 :] = dealias_hat(grid, grid.to_spectral(zeta))
        uh = weber_velocity(grid, state.y[:d], state.y[d : 2 * d])
        state.k0 = 0.5 * grid.volume * float(np.sum(np.abs(uh) ** 2))
    elif config.formulation in ("direct", "mollified"):
        state = FlowState(grid, zero_mean(grid, fh))
    else:
        # vortex stores vorticity, cotangent the covector field; the covector
        # mean is genuine state, so only the dealias pass is applied
        state = FlowState(grid, fh if config.formulation == "cotangent" else zero_mean(grid, fh))
    state.t = snap.t
    state.t1 = snap.t1
    return state
