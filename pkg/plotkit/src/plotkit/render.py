"""The four figure kinds rendered from hfcavity CSV files.

eigenfan  eigenfrequencies vs cavity detuning, colored by cavity likeness
levels    ground -> first-manifold transition differences vs cavity detuning
heatmap   2-D transmission map over (probe, cavity) detuning, log color
slice     stacked transmission / population panels vs probe detuning

Rendering is deterministic for fixed input: a fixed style, fixed color-scale
bounds (recorded in a caption line inside the image), and no timestamps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm

__all__ = ["FigureKind", "PlotSpec", "RenderError", "render"]

COLOR_FLOOR_FRACTION = 1e-4  # heatmap color floor relative to the maximum


class RenderError(RuntimeError):
    """Bad plot specification or input file."""


class FigureKind(Enum):
    EIGENFAN = "eigenfan"
    LEVELS = "levels"
    HEATMAP = "heatmap"
    SLICE = "slice"


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple[str, ...]
    kind: FigureKind
    output: str
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None
    title: str = ""

    def __post_init__(self):
        if not self.inputs:
            raise RenderError("at least one input CSV is required")
        for r in (self.x_range, self.y_range):
            if r is not None and not all(np.isfinite(r)):
                raise RenderError("axis ranges must be finite")


def _read_csv(path: str, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise RenderError(f"{path} lacks required column(s): {', '.join(missing)}")
    if not rows:
        raise RenderError(f"{path} contains no data rows")
    out = {}
    for col in header:
        values = [r[col] for r in rows]
        try:
            out[col] = np.array([float(v) if v != "" else np.nan for v in values])
        except ValueError:
            out[col] = np.array(values, dtype=object)
    return out


def _finish(fig, spec: PlotSpec, caption: str) -> None:
    ax = fig.axes[0]
    if spec.x_range:
        ax.set_xlim(*spec.x_range)
    if spec.y_range:
        ax.set_ylim(*spec.y_range)
    if spec.title:
        fig.suptitle(spec.title)
    if caption:
        fig.text(0.01, 0.01, caption, fontsize=6, color="0.4")
    fig.savefig(spec.output, dpi=150)
    plt.close(fig)


def _render_eigenfan(spec: PlotSpec) -> None:
    data = _read_csv(
        spec.inputs[0],
        ("cavity_detuning_MHz", "eigenfrequency_MHz", "cavity_likeness"),
    )
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    sc = ax.scatter(
        data["cavity_detuning_MHz"],
        data["eigenfrequency_MHz"],
        c=np.clip(data["cavity_likeness"], 0.0, 1.0),
        cmap="viridis",
        vmin=0.0,
        vmax=1.0,
        s=6,
    )
    fig.colorbar(sc, ax=ax, label="cavity likeness $\\langle a^\\dagger a\\rangle$")
    ax.set_xlabel("cavity detuning (MHz)")
    ax.set_ylabel("eigenfrequency (MHz)")
    _finish(fig, spec, "color scale fixed 0..1")


def _render_levels(spec: PlotSpec) -> None:
    data = _read_csv(
        spec.inputs[0],
        ("cavity_detuning_MHz", "ground_F", "difference_MHz", "excitable"),
    )
    ground = data["ground_F"].astype(float)
    excitable = data["excitable"].astype(float) > 0.5
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for f, color in ((3.0, "black"), (4.0, "red")):
        sel = (ground == f) & excitable
        ax.plot(
            data["cavity_detuning_MHz"][sel],
            data["difference_MHz"][sel],
            ".",
            color=color,
            markersize=3,
            label=f"from F={int(f)}",
        )
    ax.set_xlabel("cavity detuning (MHz)")
    ax.set_ylabel("transition frequency (MHz)")
    ax.legend(loc="upper left", fontsize=8)
    _finish(fig, spec, "excitable transitions only")


def _render_heatmap(spec: PlotSpec) -> None:
    data = _read_csv(
        spec.inputs[0],
        ("cavity_detuning_MHz", "probe_detuning_MHz", "transmission"),
    )
    cavity = np.unique(data["cavity_detuning_MHz"])
    probe = np.unique(data["probe_detuning_MHz"])
    grid = np.full((len(cavity), len(probe)), np.nan)
    ci = np.searchsorted(cavity, data["cavity_detuning_MHz"])
    pi = np.searchsorted(probe, data["probe_detuning_MHz"])
    grid[ci, pi] = data["transmission"]

    finite = np.isfinite(grid)
    if not finite.any():
        raise RenderError(f"{spec.inputs[0]} has no finite transmission values")
    vmax = float(np.nanmax(grid))
    vmin = max(vmax * COLOR_FLOOR_FRACTION, np.nextafter(0.0, 1.0))
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    mesh = ax.pcolormesh(
        probe, cavity, np.clip(grid, vmin, None),
        norm=LogNorm(vmin=vmin, vmax=vmax), cmap="inferno", shading="nearest",
    )
    fig.colorbar(mesh, ax=ax, label="transmission T")
    # dotted overlay: the uncoupled cavity line and bare atomic resonances
    ax.plot(probe, probe, ":", color="tab:red", linewidth=0.8)
    for line in (0.0, -251.0, -452.0, -603.0):
        if probe.min() <= line <= probe.max():
            ax.axvline(line, linestyle=":", color="tab:red", linewidth=0.8)
    ax.set_xlabel("probe detuning (MHz)")
    ax.set_ylabel("cavity detuning (MHz)")
    _finish(fig, spec, f"log color, floor {COLOR_FLOOR_FRACTION:g} of max {vmax:.3g}")


def _render_slice(spec: PlotSpec) -> None:
    primary = _read_csv(
        spec.inputs[0],
        ("probe_detuning_MHz", "transmission", "pop_F3", "pop_F4"),
    )
    fig, (ax_t, ax_p) = plt.subplots(
        2, 1, figsize=(6.4, 6.4), sharex=True, height_ratios=[1, 1]
    )
    ax_t.semilogy(primary["probe_detuning_MHz"], primary["transmission"],
                  color="tab:red", label=Path(spec.inputs[0]).stem)
    for extra in spec.inputs[1:]:
        other = _read_csv(extra, ("probe_detuning_MHz", "transmission"))
        ax_t.semilogy(other["probe_detuning_MHz"], other["transmission"],
                      "--", color="black", label=Path(extra).stem)
    ax_t.set_ylabel("transmission T")
    if len(spec.inputs) > 1:
        ax_t.legend(fontsize=8)

    probe = primary["probe_detuning_MHz"]
    ax_p.plot(probe, primary["pop_F3"], label="F=3", color="black")
    ax_p.plot(probe, primary["pop_F4"], label="F=4", color="tab:red")
    zeeman_cols = sorted(
        (c for c in primary if c.startswith("pop_m")),
        key=lambda c: int(c.removeprefix("pop_m")),
    )
    for col in zeeman_cols:
        m = int(col.removeprefix("pop_m"))
        if m < 0:
            continue  # populations are m -> -m symmetric; plot m >= 0 like the originals
        ax_p.plot(probe, primary[col], linewidth=0.8, label=f"$m_F$={m}")
    ax_p.set_xlabel("probe detuning (MHz)")
    ax_p.set_ylabel("population")
    ax_p.legend(fontsize=7, ncols=3)
    _finish(fig, spec, "")


_RENDERERS = {
    FigureKind.EIGENFAN: _render_eigenfan,
    FigureKind.LEVELS: _render_levels,
    FigureKind.HEATMAP: _render_heatmap,
    FigureKind.SLICE: _render_slice,
}


def render(spec: PlotSpec) -> str:
    """Render the figure and return the output path.

    Raises RenderError (and writes nothing) for missing columns, empty
    inputs, or unreadable files.
    """
    plt.style.use("default")
    matplotlib.rcParams.update({"figure.max_open_warning": 0})
    _RENDERERS[spec.kind](spec)
    return spec.output
