"""SVG rendering of sweep records: line plots for 1D grids, heatmaps for 2D."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .model import Mode
from .sweep import SweepRecord, SweepSpec

_STYLE = {Mode.BEYOND: "-", Mode.SECULAR: "--"}


def write_svg(spec: SweepSpec, records: Sequence[SweepRecord], path: str | Path) -> None:
    if spec.axis2 is None or spec.axis1.scale == "list":
        fig = _lines(spec, records)
    else:
        fig = _heatmap(spec, records)
    # fixed metadata keeps the SVG byte-stable between runs
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "phonon_stats"})
    plt.close(fig)


def _lines(spec: SweepSpec, records: Sequence[SweepRecord]):
    x_axis, group_axis = (spec.axis1, None) if spec.axis2 is None else (spec.axis2, spec.axis1)
    curves: dict[tuple, list] = defaultdict(list)
    for rec in records:
        key = (rec.mode, None if group_axis is None else getattr(rec.config, group_axis.field))
        curves[key].append((getattr(rec.config, x_axis.field), rec.g2, rec.n_mean))

    fig, (ax_g2, ax_n) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.4))
    for (mode, group), pts in curves.items():
        x, g2, n = (np.array(c) for c in zip(*pts))
        label = mode.value if group is None else f"{mode.value}, {group_axis.name}={group:g}"
        ax_g2.plot(x, g2, _STYLE[mode], color="tab:blue" if group is None else None, label=label)
        ax_n.plot(x, n, _STYLE[mode], color="tab:red" if group is None else None, label=label)
    ax_g2.axhline(1.0, color="0.6", lw=0.8)
    ax_g2.set_ylabel("g2(0)")
    ax_n.set_ylabel("<n>")
    ax_n.set_xlabel(x_axis.name)
    if x_axis.scale == "log10":
        ax_n.set_xscale("log")
    if spec.axis2 is None and x_axis.scale == "log10":
        ax_n.set_yscale("log")
    ax_g2.legend(fontsize="x-small")
    ax_g2.set_title(spec.caption[:90], fontsize="small")
    fig.tight_layout()
    return fig


def _heatmap(spec: SweepSpec, records: Sequence[SweepRecord]):
    x = spec.axis1.grid()
    y = spec.axis2.grid()
    modes = spec.modes
    fig, axes = plt.subplots(len(modes), 2, figsize=(9.6, 3.6 * len(modes)), squeeze=False)
    for row, mode in enumerate(modes):
        recs = [r for r in records if r.mode is mode]
        g2 = np.array([r.g2 for r in recs]).reshape(len(x), len(y)).T
        n = np.array([r.n_mean for r in recs]).reshape(len(x), len(y)).T
        for ax, data, label in ((axes[row, 0], g2, "g2(0)"), (axes[row, 1], n, "<n>")):
            mesh = ax.pcolormesh(x, y, data, shading="nearest")
            if label == "g2(0)":
                ax.contour(x, y, data, levels=[1.0], colors="w", linewidths=0.8)
            else:
                ax.contour(x, y, data, levels=[1.0], colors="0.5", linewidths=0.8)
            fig.colorbar(mesh, ax=ax, label=label)
            if spec.axis1.scale == "log10":
                ax.set_xscale("log")
            ax.set_xlabel(spec.axis1.name)
            ax.set_ylabel(spec.axis2.name)
            ax.set_title(f"{label}, {mode.value}", fontsize="small")
    fig.tight_layout()
    return fig
