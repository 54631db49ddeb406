"""Static SVG panels for simulation runs.

Figures are built on bare ``Figure`` objects (no pyplot state) and written
with a fixed hash salt and no date metadata, so identical traces give
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

from matplotlib import rcParams  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

STYLE = {
    "svg.hashsalt": "caccsim",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}
COLORS = {"acc": "#d62728", "cacc": "#1f77b4", "lead": "0.3"}


def _figure():
    rcParams.update(STYLE)
    fig = Figure(figsize=(6.4, 3.2))
    ax = fig.add_subplot(1, 1, 1)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _color(label):
    return COLORS.get(label.split()[0].lower(), None)


def emit_plots(runs, out_dir, vehicle: int = 1, t_hw: float | None = None) -> list[Path]:
    """Write ``speed.svg``, ``headway.svg`` and ``gap.svg`` for ``vehicle``.

    ``runs`` maps a legend label to a trace; several runs are overlaid.
    """
    if not runs or any(not tr.records for tr in runs.values()):
        raise ValueError("cannot plot an empty trace")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = _figure()
    first = next(iter(runs.values()))
    ax.plot(first.t, first.column(0, "v"), color=COLORS["lead"], linestyle="--", label="lead")
    for label, tr in runs.items():
        ax.plot(tr.t, tr.column(vehicle, "v"), color=_color(label), label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("speed [m/s]")
    ax.legend(loc="best")
    written.append(_save(fig, out / "speed.svg"))

    fig, ax = _figure()
    for label, tr in runs.items():
        ax.plot(tr.t, tr.column(vehicle, "h"), color=_color(label), label=label)
    if t_hw is not None:
        ax.axhline(t_hw, color="k", linewidth=0.8, linestyle=":", label=f"set {t_hw:g} s")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("time headway [s]")
    ax.legend(loc="best")
    written.append(_save(fig, out / "headway.svg"))

    fig, ax = _figure()
    for label, tr in runs.items():
        ax.plot(tr.t, tr.column(vehicle, "gap"), color=_color(label), label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("gap [m]")
    ax.legend(loc="best")
    written.append(_save(fig, out / "gap.svg"))
    return written


def emit_platoon_plot(trace, out_dir) -> Path:
    """Spacing error of every follower in a chain."""
    if not trace.records:
        raise ValueError("cannot plot an empty trace")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = _figure()
    for i in range(1, trace.n_vehicles):
        ax.plot(trace.t, trace.column(i, "e"), label=f"follower {i}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("spacing error [m]")
    ax.legend(loc="best", ncol=2)
    return _save(fig, out / "spacing_error.svg")
