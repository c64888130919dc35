"""The five figure kinds built from a completed scenario directory.

Each builder returns a matplotlib figure; :func:`render_figures` writes
them all.  Rendering is deterministic: fixed colormaps, fixed view
angles, no timestamps embedded in the output files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import DataFormatError, latest_snapshot_tag, read_field, read_table

SURFACE_KW = dict(cmap="viridis", rstride=1, cstride=1, linewidth=0, antialiased=False)
VIEW = dict(elev=28, azim=-60)


def _bar3d(ax, y1, y2, heights, color):
    width = 0.015 * max(y1.max() - y1.min(), 1e-9) + 0.005
    ax.bar3d(y1 - width / 2, y2 - width / 2, np.zeros_like(heights),
             width, width, heights, color=color, shade=True)
    ax.view_init(**VIEW)
    ax.set_xlabel("y1")
    ax.set_ylabel("y2")


def occupancy_figure(homes_csv) -> plt.Figure:
    """Bars of height n at each home location."""
    t = read_table(homes_csv)
    fig = plt.figure(figsize=(7, 5))
    ax = fig.add_subplot(projection="3d")
    _bar3d(ax, t["y1"], t["y2"], t["n"], color="tab:blue")
    ax.set_title("people per home")
    return fig


def density_figure(density_csv) -> plt.Figure:
    """Surface of the summed home kernels weighted by occupancy."""
    X1, X2, V = read_field(density_csv)
    fig = plt.figure(figsize=(7, 5))
    ax = fig.add_subplot(projection="3d")
    ax.plot_surface(X1, X2, V, **SURFACE_KW)
    ax.view_init(**VIEW)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title("initial at-home density")
    return fig


def timeseries_figure(timeseries_csv) -> plt.Figure:
    """The four aggregate curves: at home, traveling, working, total."""
    t = read_table(timeseries_csv)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t["t"], t["U"], label="at home", color="tab:blue")
    ax.plot(t["t"], t["V"], label="traveling", color="tab:orange")
    ax.plot(t["t"], t["W"], label="working", color="tab:olive")
    ax.plot(t["t"], t["total"], label="total", color="tab:purple")
    ax.set_xlabel("time (day)")
    ax.set_ylabel("people")
    ax.legend(loc="center right")
    ax.set_title("compartment totals")
    return fig


def compartments_figure(homes_csv) -> plt.Figure:
    """Per-home triptych: at home, traveling, working, shared layout."""
    t = read_table(homes_csv)
    fig = plt.figure(figsize=(13, 4.2))
    panels = (("at home", t["u"], "tab:blue"),
              ("traveling", t["int_v"], "tab:orange"),
              ("working", t["int_w"], "tab:olive"))
    limits = ((t["y1"].min(), t["y1"].max()), (t["y2"].min(), t["y2"].max()))
    for k, (title, heights, color) in enumerate(panels, start=1):
        ax = fig.add_subplot(1, 3, k, projection="3d")
        _bar3d(ax, t["y1"], t["y2"], heights, color)
        ax.set_xlim(*limits[0])
        ax.set_ylim(*limits[1])
        ax.set_title(title)
    return fig


def fields_figure(field_v_csv, field_w_csv) -> plt.Figure:
    """Traveler and worker density surfaces side by side."""
    fig = plt.figure(figsize=(11, 4.5))
    for k, (path, title) in enumerate(
            ((field_v_csv, "travelers"), (field_w_csv, "workers")), start=1):
        X1, X2, V = read_field(path)
        ax = fig.add_subplot(1, 2, k, projection="3d")
        ax.plot_surface(X1, X2, V, **SURFACE_KW)
        ax.view_init(**VIEW)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title(title)
    return fig


def _save(fig, path: Path, fmt: str):
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt, dpi=110, metadata=metadata)
    plt.close(fig)


def render_figures(out_dir, fmt: str = "png") -> list[Path]:
    """Render all five figure kinds from a scenario output directory.

    Expects the files written by a completed ``simulate`` run; raises
    :class:`DataFormatError` if any input is missing or malformed.
    Returns the image paths written, inside ``out_dir``.
    """
    if fmt not in ("png", "svg"):
        raise DataFormatError(f"unsupported format {fmt!r}")
    out_dir = Path(out_dir)
    tag = latest_snapshot_tag(out_dir, "homes")
    jobs = [
        (f"home_occupancy.{fmt}", occupancy_figure(out_dir / f"homes_t{tag}.csv")),
        (f"initial_density.{fmt}", density_figure(out_dir / "initial_density.csv")),
        (f"aggregate_timeseries.{fmt}", timeseries_figure(out_dir / "timeseries.csv")),
        (f"home_compartments_t{tag}.{fmt}", compartments_figure(out_dir / f"homes_t{tag}.csv")),
        (f"fields_t{tag}.{fmt}", fields_figure(out_dir / f"field_v_t{tag}.csv",
                                               out_dir / f"field_w_t{tag}.csv")),
    ]
    written = []
    for name, fig in jobs:
        path = out_dir / name
        _save(fig, path, fmt)
        written.append(path)
    return written
