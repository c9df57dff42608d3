"""Report figures, rendered to PNG files (no windows)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from gullypost.xsect import GROUND, WALL  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
# fixed metadata keeps the PNG bytes reproducible
_META = {"Software": "gullypost"}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_plan(path, dom, trajectory, corrected, fragment=None, truth_end=None):
    """Plan view over the orthophoto: drifted and corrected trajectories."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 4))
        extent = (dom.origin_x, dom.origin_x + dom.width * dom.cell,
                  dom.origin_y - dom.height * dom.cell, dom.origin_y)
        ax.imshow(dom.values, cmap="gray", extent=extent, interpolation="nearest", vmin=0, vmax=255)
        ax.plot(trajectory.xyz[:, 0], trajectory.xyz[:, 1], lw=1.0, color="tab:red", label="input")
        ax.plot(corrected.xyz[:, 0], corrected.xyz[:, 1], lw=1.0, color="tab:cyan", label="corrected")
        if fragment is not None:
            ax.plot(fragment.points[:, 0], fragment.points[:, 1], ls="--", lw=0.8, color="yellow", label="DOM centerline")
        if truth_end is not None:
            ax.plot([truth_end[0]], [truth_end[1]], marker="*", ms=9, color="gold", ls="none", label="reference end")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_aspect("equal")
        ax.legend(loc="best")
        return _save(fig, path)


def plot_elevation(path, trajectory, corrected, bench_t=None, bench_z=None):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 3.2))
        ax.plot(trajectory.t, trajectory.xyz[:, 2], color="tab:red", lw=1.0, label="input")
        ax.plot(corrected.t, corrected.xyz[:, 2], color="tab:blue", lw=1.0, label="corrected")
        if bench_t is not None:
            ax.plot(bench_t, bench_z, color="k", lw=0.6, alpha=0.6, label="barometer")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("relative elevation (m)")
        ax.legend(loc="best")
        return _save(fig, path)


def plot_sections(path, pairs, max_panels=6):
    """``pairs`` is a list of ``(name, raw_section, reconstructed_section)``."""
    pairs = pairs[:max_panels]
    if not pairs:
        return None
    ncols = min(3, len(pairs))
    nrows = int(np.ceil(len(pairs) / ncols))
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(nrows, ncols, figsize=(3.3 * ncols, 2.6 * nrows), squeeze=False)
        for ax, (name, raw, rec) in zip(axes.ravel(), pairs):
            for lab, color in ((GROUND, "tab:brown"), (WALL, "tab:gray")):
                sel = raw.labels == lab
                ax.scatter(raw.wh[sel, 0], raw.wh[sel, 1], s=1, color=color, alpha=0.5)
            ax.plot(rec.wh[:, 0], rec.wh[:, 1], color="tab:blue", lw=1.0)
            ax.set_title(name)
            ax.set_xlabel("w (m)")
            ax.set_ylabel("h (m)")
        for ax in axes.ravel()[len(pairs):]:
            ax.axis("off")
        fig.tight_layout()
        return _save(fig, path)


def plot_dem(path, dem, max_pixels=2000):
    z = dem.z
    step = max(1, int(np.ceil(max(z.shape) / max_pixels)))
    z = z[::step, ::step]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 4))
        extent = (dem.xllcorner, dem.xllcorner + dem.ncols * dem.cellsize,
                  dem.yllcorner, dem.yllcorner + dem.nrows * dem.cellsize)
        im = ax.imshow(np.ma.masked_invalid(z), cmap="terrain", extent=extent, interpolation="nearest")
        fig.colorbar(im, ax=ax, label="elevation (m)")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_aspect("equal")
        return _save(fig, path)


def figure_dir(out_dir):
    path = os.path.join(out_dir, "figures")
    os.makedirs(path, exist_ok=True)
    return path
