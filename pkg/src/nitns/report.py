"""Delimited reports and optional figure rendering.

The CSV layout is part of the package's external interface: a timestamp
comment, a fixed conventions comment, the exact header row, then one row per
output time.  Numbers are written with repr-level precision so identical runs
produce byte-identical files apart from the timestamp line.
"""

import csv
import datetime
import os

from .diagnostics import CSV_COLUMNS, DiagnosticsRecord

__all__ = [
    "write_csv",
    "write_table",
    "CsvStream",
    "render_run_figures",
    "render_compare_figure",
    "render_study_figure",
]

_CONVENTIONS = (
    "# box [0,2pi)^d; spectral coefficients fftn/n^d; energies are volume integrals; "
    "empty cells mark diagnostics the formulation does not carry"
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def write_csv(path, records: list[DiagnosticsRecord], stamp: bool = True) -> None:
    with CsvStream(path, stamp=stamp) as stream:
        for rec in records:
            stream.write(rec)


class CsvStream:
    """Incremental CSV writer; rows land on disk as they are produced, so a
    run that dies mid-trajectory still leaves a readable partial record."""

    def __init__(self, path, stamp: bool = True):
        self._fh = open(path, "w", newline="")
        if stamp:
            self._fh.write(
                f"# written {datetime.datetime.now().isoformat(timespec='seconds')}\n"
            )
        self._fh.write(_CONVENTIONS + "\n")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_COLUMNS)
        self._fh.flush()
        self.rows = 0

    def write(self, rec: DiagnosticsRecord) -> None:
        self._writer.writerow([_cell(v) for v in rec.csv_values()])
        self._fh.flush()
        self.rows += 1

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_table(path, header: list[str], rows: list[list], comments: list[str] = ()) -> None:
    """Generic delimited report (compare / restart-study outputs)."""
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) if not isinstance(v, str) else v for v in row])


# ----------------------------------------------------------------- figures
# matplotlib is imported lazily so the solver library never pays for it.


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_run_figures(outdir, records: list[DiagnosticsRecord]) -> list[str]:
    plt = _pyplot()
    made = []
    t = [r.t for r in records]

    fig, ax = plt.subplots(1, 2, figsize=(9.6, 3.6))
    ax[0].plot(t, [r.K for r in records], label="kinetic energy")
    ax[0].plot(t, [r.enstrophy for r in records], label="enstrophy")
    ax[0].set_xlabel("t")
    ax[0].set_yscale("log")
    ax[0].legend(frameon=False)
    ax[1].plot(t, [abs(r.budget_residual) for r in records])
    ax[1].set_xlabel("t")
    ax[1].set_ylabel("|energy budget residual|")
    ax[1].set_yscale("log")
    fig.tight_layout()
    path = os.path.join(outdir, "energy.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    made.append(path)

    if any(r.max_grad_ell is not None for r in records):
        fig, ax = plt.subplots(figsize=(5.6, 3.6))
        ax.plot(t, [r.max_grad_ell for r in records], label="sup |grad displacement|")
        ax.step(t, [r.restarts for r in records], where="post", label="restarts")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        fig.tight_layout()
        path = os.path.join(outdir, "displacement.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        made.append(path)
    return made


def render_compare_figure(outdir, series: dict[str, tuple[list, list]]) -> str:
    """series: label -> (times, running L2 velocity differences)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (t, diffs) in sorted(series.items()):
        ax.plot(t, diffs, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("L2 velocity difference vs direct")
    ax.set_yscale("log")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, "compare.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_study_figure(outdir, rows: list[dict]) -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    by_seed: dict[int, list] = {}
    for row in rows:
        by_seed.setdefault(row["seed"], []).append((row["g"], row["mean_interval"]))
    for seed, pts in sorted(by_seed.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"seed {seed}")
    ax.set_xlabel("restart threshold g")
    ax.set_ylabel("mean inter-restart interval")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = os.path.join(outdir, "restart_intervals.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
