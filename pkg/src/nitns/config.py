"""Plain-text experiment configuration.

Experiments are archived artifacts, so they're described by `key = value`
files rather than long flag strings.  Dotted keys group related settings
(`grid.n`, `mollifier.delta`, ...).  Parsing is strict: unknown keys, bad
types, and out-of-range values are reported with the offending line number.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid
from .initial import make_initial
from .mollifier import KINDS as MOLLIFIER_KINDS
from .mollifier import Mollifier
from .solvers import FORMULATIONS, SCHEMES, SolverConfig

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "parse_overrides"]

IC_KINDS = ("taylor_green", "abc", "random_band")
ZETA_MODES = ("derived", "evolved")


class ConfigError(ValueError):
    """Raised for unparseable or invalid experiment configurations."""


@dataclass
class ExperimentConfig:
    grid_dim: int = 0
    grid_n: int = 0
    nu: float = -1.0
    dt: float | None = None
    cfl: float = 0.5
    t_end: float = -1.0
    formulation: str = ""
    scheme: str = "RK4"
    mollifier_kind: str | None = None
    mollifier_delta: float | None = None
    el_g: float = 0.1
    el_s0: float = 0.25
    el_zeta: str = "derived"
    ic_kind: str = ""
    ic_seed: int = 0
    ic_amplitude: float = 1.0
    ic_kmin: int = 1
    ic_kmax: int | None = None
    output_dir: str = "out"
    output_every: float = 0.0
    output_snapshots: bool = False
    output_figures: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    # -- factories -----------------------------------------------------------

    def build_grid(self) -> Grid:
        return Grid(self.grid_dim, self.grid_n)

    def build_mollifier(self) -> Mollifier | None:
        if self.mollifier_kind is None:
            return None
        return Mollifier(self.mollifier_kind, self.mollifier_delta)

    def build_initial(self, grid: Grid) -> np.ndarray:
        kwargs = {"amplitude": self.ic_amplitude}
        if self.ic_kind == "random_band":
            kwargs.update(seed=self.ic_seed, kmin=self.ic_kmin, kmax=self.ic_kmax)
        return make_initial(grid, self.ic_kind, **kwargs)

    def build_solver_config(self, grid: Grid, u0_hat: np.ndarray) -> SolverConfig:
        dt = self.dt
        if dt is None:
            # no explicit step: take it from the advective bound of the
            # initial data (the runtime clamp still guards acceleration)
            u0 = grid.to_physical(u0_hat)
            u_max = float(np.max(np.sqrt(np.sum(u0**2, axis=0))))
            if u_max <= 0:
                raise ConfigError("dt is unset and the initial velocity is zero; set dt")
            dt = self.cfl * grid.h / u_max
        return SolverConfig(
            nu=self.nu,
            dt=dt,
            t_end=self.t_end,
            formulation=self.formulation,
            mollifier=self.build_mollifier(),
            scheme=self.scheme,
            cfl=self.cfl,
            output_every=self.output_every,
            el_g=self.el_g,
            el_s0=self.el_s0,
            zeta_mode=self.el_zeta,
        )


# key -> (attribute, converter name)
_SCHEMA = {
    "grid.dim": ("grid_dim", "int"),
    "grid.n": ("grid_n", "int"),
    "nu": ("nu", "float"),
    "dt": ("dt", "float"),
    "cfl": ("cfl", "float"),
    "t_end": ("t_end", "float"),
    "formulation": ("formulation", "str"),
    "scheme": ("scheme", "str"),
    "mollifier.kind": ("mollifier_kind", "str"),
    "mollifier.delta": ("mollifier_delta", "float"),
    "el.g": ("el_g", "float"),
    "el.s0": ("el_s0", "float"),
    "el.zeta": ("el_zeta", "str"),
    "ic.kind": ("ic_kind", "str"),
    "ic.seed": ("ic_seed", "int"),
    "ic.amplitude": ("ic_amplitude", "float"),
    "ic.kmin": ("ic_kmin", "int"),
    "ic.kmax": ("ic_kmax", "int"),
    "output.dir": ("output_dir", "str"),
    "output.every": ("output_every", "float"),
    "output.snapshots": ("output_snapshots", "bool"),
    "output.figures": ("output_figures", "bool"),
}

_REQUIRED = ("grid.dim", "grid.n", "nu", "t_end", "formulation", "ic.kind")

_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _convert(key: str, text: str, kind: str, where: str):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            word = text.lower()
            if word not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[word]
        return text
    except ValueError:
        raise ConfigError(f"{where}: {key} expects a {kind}, got {text!r}") from None


def _parse_pairs(pairs: list[tuple[str, str, str]]) -> dict:
    """(key, raw value, location) triples -> attribute dict, type-checked."""
    out = {}
    raw = {}
    for key, text, where in pairs:
        if key not in _SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        attr, kind = _SCHEMA[key]
        out[attr] = _convert(key, text, kind, where)
        raw[key] = text
    out["raw"] = raw
    return out


def _is_pow2(n: int) -> bool:
    return n >= 8 and (n & (n - 1)) == 0


def _validate(cfg: ExperimentConfig, where_of: dict) -> ExperimentConfig:
    def where(key):
        return where_of.get(key, "config")

    def fail(key, message):
        raise ConfigError(f"{where(key)}: {key} {message}")

    for key in _REQUIRED:
        if key not in where_of:
            raise ConfigError(f"missing required key {key!r}")

    if cfg.grid_dim not in (2, 3):
        fail("grid.dim", "must be 2 or 3")
    if not _is_pow2(cfg.grid_n):
        fail("grid.n", "must be even power of two (>= 8)")
    if cfg.nu < 0:
        fail("nu", "must be >= 0")
    if cfg.dt is not None and cfg.dt <= 0:
        fail("dt", "must be > 0")
    if cfg.cfl <= 0:
        fail("cfl", "must be > 0")
    if cfg.t_end < 0:
        fail("t_end", "must be >= 0")
    if cfg.formulation not in FORMULATIONS:
        fail("formulation", f"must be one of {', '.join(FORMULATIONS)}")
    if cfg.scheme not in SCHEMES:
        fail("scheme", f"must be one of {', '.join(SCHEMES)}")
    if cfg.mollifier_kind is not None and cfg.mollifier_kind not in MOLLIFIER_KINDS:
        fail("mollifier.kind", f"must be one of {', '.join(MOLLIFIER_KINDS)}")
    if cfg.mollifier_delta is not None:
        if cfg.mollifier_delta < 0:
            fail("mollifier.delta", "must be >= 0")
        if cfg.mollifier_kind is None:
            fail("mollifier.delta", "given without mollifier.kind")
    if cfg.mollifier_kind is not None and cfg.mollifier_delta is None:
        fail("mollifier.kind", "given without mollifier.delta")
    if cfg.formulation in ("mollified", "vortex", "cotangent") and cfg.mollifier_kind is None:
        fail("formulation", f"{cfg.formulation!r} requires mollifier.kind and mollifier.delta")
    if not (0 < cfg.el_g < 1):
        fail("el.g", "must lie in (0, 1)")
    if not (0 < cfg.el_s0 <= 1):
        fail("el.s0", "must lie in (0, 1]")
    if cfg.el_zeta not in ZETA_MODES:
        fail("el.zeta", f"must be one of {', '.join(ZETA_MODES)}")
    if cfg.ic_kind not in IC_KINDS:
        fail("ic.kind", f"must be one of {', '.join(IC_KINDS)}")
    if cfg.ic_amplitude < 0:
        fail("ic.amplitude", "must be >= 0")
    if cfg.ic_kind == "random_band":
        if cfg.ic_kmin < 1:
            fail("ic.kmin", "must be >= 1")
        kcut = cfg.grid_n // 3
        if cfg.ic_kmax is not None:
            if cfg.ic_kmax < cfg.ic_kmin:
                fail("ic.kmax", "must be >= ic.kmin")
            if cfg.ic_kmax > kcut:
                fail("ic.kmax", f"must stay inside the dealias cutoff ({kcut} for n={cfg.grid_n})")
    if cfg.output_every < 0:
        fail("output.every", "must be >= 0")
    return cfg


def parse_config(text: str, overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse a `key = value` config (and optional --set overrides)."""
    pairs = []
    where_of = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        if key in where_of:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        where_of[key] = f"line {lineno}"
        pairs.append((key, value, f"line {lineno}"))

    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set: expected key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        where_of[key] = "--set"
        pairs.append((key, value, "--set"))

    cfg = ExperimentConfig(**_parse_pairs(pairs))
    return _validate(cfg, where_of)


def parse_overrides(base: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply further key=value overrides to an already-parsed config."""
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set: expected key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        pairs.append((key, value, "--set"))
    fields = _parse_pairs(pairs)
    raw = dict(base.raw)
    raw.update(fields.pop("raw"))
    cfg = replace(base, raw=raw, **fields)
    where_of = {key: "config" for key in base.raw}
    where_of.update({key: "--set" for key, _, _ in pairs})
    return _validate(cfg, where_of)
