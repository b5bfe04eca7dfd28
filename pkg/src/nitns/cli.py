"""Command-line experiment drivers.

Four subcommands cover the workflow: `run` advances one trajectory and writes
the diagnostics CSV (plus optional snapshots and figures), `compare` races
several formulations from shared initial data, `verify` executes the built-in
property suites, and `restart-study` sweeps the reset threshold.

Exit codes: 0 success, 2 property failure, 3 blow-up, 4 bad configuration.
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, parse_config, parse_overrides
from .report import (
    CsvStream,
    render_compare_figure,
    render_run_figures,
    render_study_figure,
    write_table,
)
from .snapshot import state_to_snapshot, write_snapshot
from .solvers import FORMULATIONS, BlowupError, run
from .verify import run_suites, suite_names

EXIT_OK = 0
EXIT_PROPERTY = 2
EXIT_BLOWUP = 3
EXIT_CONFIG = 4


def _load_config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
    cfg = parse_config(text)
    if args.set:
        cfg = parse_overrides(cfg, args.set)
    if getattr(args, "figures", False):
        cfg = dataclasses.replace(cfg, output_figures=True)
    return cfg


def _velocity_l2(grid, ua, ub) -> float:
    return float(np.sqrt(grid.volume * np.sum(np.abs(ua - ub) ** 2)))


# ------------------------------------------------------------------ run


def cmd_run(args) -> int:
    cfg = _load_config(args)
    grid = cfg.build_grid()
    u0 = cfg.build_initial(grid)
    scfg = cfg.build_solver_config(grid, u0)
    os.makedirs(cfg.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg.output_dir, "diagnostics.csv")

    stream = CsvStream(csv_path)
    counter = {"snap": 0}

    def on_record(state, ctx, record):
        stream.write(record)
        if cfg.output_snapshots:
            snap = state_to_snapshot(grid, state, scfg)
            path = os.path.join(cfg.output_dir, f"snapshot_{counter['snap']:04d}.bin")
            write_snapshot(path, snap)
            counter["snap"] += 1

    try:
        result = run(grid, scfg, u0_hat=u0, on_record=on_record)
    except BlowupError as exc:
        stream.close()
        print(f"blow-up at t = {exc.t:.6g}: {exc.reason}", file=sys.stderr)
        print(f"partial diagnostics retained in {csv_path} ({stream.rows} rows)", file=sys.stderr)
        return EXIT_BLOWUP
    finally:
        stream.close()

    print(f"wrote {csv_path} ({stream.rows} rows, {counter['snap']} snapshots)")
    rec = result.records[-1]
    print(
        f"t = {rec.t:.6g}  K = {rec.K:.6g}  enstrophy = {rec.enstrophy:.6g}  "
        f"restarts = {result.state.restart_count}  wall = {result.wall_time:.2f}s"
    )
    if result.nondim is not None:
        nd = result.nondim
        print(f"R0 = {nd.R0:.6g}  G = {nd.G:.6g}  rho = {nd.rho:.6g}  tau = {nd.tau:.6g}")
    for key, value in sorted(result.extras.items()):
        if isinstance(value, dict):
            for sub, subval in sorted(value.items()):
                if isinstance(subval, float):
                    print(f"{key}.{sub} = {subval:.6g}")
        elif isinstance(value, float):
            print(f"{key} = {value:.6g}")
    if cfg.output_figures:
        for path in render_run_figures(cfg.output_dir, result.records):
            print(f"wrote {path}")
    return EXIT_OK


# -------------------------------------------------------------- compare


def _needs_filter(formulation: str) -> bool:
    return formulation in ("mollified", "vortex", "cotangent")


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    formulations = [f.strip() for f in args.formulations.split(",") if f.strip()]
    if len(formulations) < 2:
        raise ConfigError("compare needs at least two formulations")
    for f in formulations:
        if f not in FORMULATIONS:
            raise ConfigError(f"unknown formulation {f!r}; choose from {FORMULATIONS}")
        if f == "eulerian_lagrangian":
            raise ConfigError("compare races the velocity formulations; run handles the Lagrangian one")
    if len(set(formulations)) != len(formulations):
        raise ConfigError("compare formulations must be distinct")

    if args.deltas:
        deltas = [float(d) for d in args.deltas.split(",") if d.strip()]
    elif cfg.mollifier_delta is not None:
        deltas = [cfg.mollifier_delta]
    elif any(_needs_filter(f) for f in formulations):
        raise ConfigError("filtered formulations need --deltas or mollifier.delta")
    else:
        deltas = [0.0]
    kind = cfg.mollifier_kind or "poisson"

    grid = cfg.build_grid()
    u0 = cfg.build_initial(grid)
    neutral = dataclasses.replace(
        cfg, formulation="direct", mollifier_kind=None, mollifier_delta=None
    )
    base = neutral.build_solver_config(grid, u0)

    members = {}  # (formulation, delta or None) -> RunResult

    def member(formulation, delta):
        key = (formulation, delta if _needs_filter(formulation) else None)
        if key not in members:
            from .mollifier import Mollifier

            scfg = dataclasses.replace(
                base,
                formulation=formulation,
                mollifier=Mollifier(kind, delta) if _needs_filter(formulation) else None,
            )
            members[key] = run(grid, scfg, u0_hat=u0, keep_fields=True)
        return members[key]

    series = {}
    terminal = {}
    times = None
    for delta in deltas:
        results = [(f, member(f, delta)) for f in formulations]
        t0 = [t for t, _ in results[0][1].field_history]
        if times is None:
            times = t0
        for i in range(len(results)):
            for j in range(i + 1, len(results)):
                (fa, ra), (fb, rb) = results[i], results[j]
                label = f"{fa}_vs_{fb}_d{delta:g}"
                if label in series:
                    continue
                ha, hb = ra.field_history, rb.field_history
                if len(ha) != len(hb) or any(
                    abs(ta - tb) > 1e-9 for (ta, _), (tb, _) in zip(ha, hb)
                ):
                    raise ConfigError(
                        "record times diverged between members; set dt explicitly"
                    )
                diffs = [_velocity_l2(grid, ua, ub) for (_, ua), (_, ub) in zip(ha, hb)]
                series[label] = (t0, diffs)
                terminal[label] = diffs[-1]

    os.makedirs(cfg.output_dir, exist_ok=True)
    out_csv = os.path.join(cfg.output_dir, "compare.csv")
    labels = sorted(series)
    rows = [
        [times[i]] + [series[lab][1][i] for lab in labels] for i in range(len(times))
    ]
    comments = [f"terminal {lab} = {terminal[lab]:.17g}" for lab in labels]
    write_table(out_csv, ["t"] + labels, rows, comments=comments)
    print(f"wrote {out_csv}")
    for lab in labels:
        print(f"terminal {lab} = {terminal[lab]:.6g}")
    if cfg.output_figures:
        print(f"wrote {render_compare_figure(cfg.output_dir, series)}")
    return EXIT_OK


# --------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    names = args.suites or suite_names()
    if "all" in names:
        names = suite_names()
    unknown = [n for n in names if n not in suite_names()]
    if unknown:
        raise ConfigError(
            f"unknown suite(s) {unknown}; choose from {suite_names()} or 'all'"
        )
    return EXIT_OK if run_suites(names) else EXIT_PROPERTY


# --------------------------------------------------------- restart-study


def cmd_restart_study(args) -> int:
    cfg = _load_config(args)
    if cfg.formulation != "eulerian_lagrangian":
        raise ConfigError("restart-study requires formulation = eulerian_lagrangian")
    g_list = sorted(float(g) for g in args.g_list.split(",") if g.strip())
    if not g_list:
        raise ConfigError("--g-list needs at least one threshold")
    for g in g_list:
        if not 0 < g < 1:
            raise ConfigError(f"thresholds must lie in (0, 1), got {g}")
    seeds = (
        [int(s) for s in args.seeds.split(",") if s.strip()]
        if args.seeds
        else [cfg.ic_seed]
    )

    grid = cfg.build_grid()
    rows = []
    for seed in seeds:
        u0 = dataclasses.replace(cfg, ic_seed=seed).build_initial(grid)
        base = cfg.build_solver_config(grid, u0)
        for g in g_list:
            scfg = dataclasses.replace(base, el_g=g)
            result = run(grid, scfg, u0_hat=u0)
            stops = [ev["t"] for ev in result.restart_events]
            intervals = np.diff([0.0] + stops)
            big_g = result.nondim.G if result.nondim else 0.0
            rows.append(
                {
                    "g": g,
                    "seed": seed,
                    "restarts": len(stops),
                    "mean_interval": float(np.mean(intervals)) if len(stops) else None,
                    "min_interval": float(np.min(intervals)) if len(stops) else None,
                    "max_interval": float(np.max(intervals)) if len(stops) else None,
                    "G": big_g,
                    "predicted_scale": g * big_g**-7 if big_g > 0 else None,
                }
            )

    os.makedirs(cfg.output_dir, exist_ok=True)
    header = ["g", "seed", "restarts", "mean_interval", "min_interval",
              "max_interval", "G", "predicted_scale"]
    out_csv = os.path.join(cfg.output_dir, "restart_study.csv")
    write_table(
        out_csv,
        header,
        [[row[h] for h in header] for row in rows],
        comments=["intervals measured between run start and successive resets; "
                  "the unfinished tail window is not counted"],
    )
    print(f"wrote {out_csv}")
    for row in rows:
        mean = "none" if row["mean_interval"] is None else f"{row['mean_interval']:.6g}"
        print(
            f"g = {row['g']:g}  seed = {row['seed']}  restarts = {row['restarts']}  "
            f"mean interval = {mean}  G = {row['G']:.6g}"
        )
    if cfg.output_figures:
        plotted = [r for r in rows if r["mean_interval"] is not None]
        if plotted:
            print(f"wrote {render_study_figure(cfg.output_dir, plotted)}")

    # a larger threshold must never shorten the mean inter-restart interval
    violated = False
    for seed in seeds:
        means = [
            (row["g"], row["mean_interval"] if row["mean_interval"] is not None else np.inf)
            for row in rows
            if row["seed"] == seed
        ]
        means.sort()
        for (g_lo, m_lo), (g_hi, m_hi) in zip(means, means[1:]):
            if m_hi < m_lo:
                print(
                    f"monotonicity violated for seed {seed}: g = {g_hi:g} has mean "
                    f"interval {m_hi:.6g} < {m_lo:.6g} at g = {g_lo:g}",
                    file=sys.stderr,
                )
                violated = True
    return EXIT_PROPERTY if violated else EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nitns",
        description="Spectral periodic-box flow laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry (repeatable)",
        )
        p.add_argument("--figures", action="store_true", help="also render PNG figures")

    p_run = sub.add_parser("run", help="advance one trajectory, write diagnostics")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="race formulations from shared initial data")
    common(p_cmp)
    p_cmp.add_argument(
        "--formulations",
        required=True,
        help="comma-separated list, e.g. direct,mollified",
    )
    p_cmp.add_argument("--deltas", help="comma-separated filter widths")
    p_cmp.set_defaults(func=cmd_compare)

    p_ver = sub.add_parser("verify", help="run built-in property suites")
    p_ver.add_argument("suites", nargs="*", help=f"suites from {suite_names()} (default: all)")
    p_ver.set_defaults(func=cmd_verify)

    p_rs = sub.add_parser("restart-study", help="sweep the displacement reset threshold")
    common(p_rs)
    p_rs.add_argument("--g-list", required=True, help="comma-separated thresholds in (0,1)")
    p_rs.add_argument("--seeds", help="comma-separated initial-condition seeds")
    p_rs.set_defaults(func=cmd_restart_study)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid value: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
