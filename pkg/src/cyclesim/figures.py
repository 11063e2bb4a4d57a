"""Matplotlib figure rendering for the CLI report path.

All functions write PNG files next to the delimited outputs and return the
path.  Rendering is headless (Agg); nothing here feeds back into the
pipeline computations.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import KinematicsHistograms, ecdf
from .network import Network, Trajectory

_FIGSIZE = (6.0, 3.8)
_DPI = 150


def fit_overlay_figure(
    samples,
    dist,
    path: str | Path,
    xlabel: str,
    scalar_marker: float | None = None,
    bins: int = 60,
) -> Path:
    """Histogram of the fitted samples with the fitted PDF on top.

    The optional vertical marker shows the scalar default the distribution
    replaces.
    """
    samples = np.asarray(samples, dtype=float)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.hist(samples, bins=bins, density=True, color="#9ecae1", edgecolor="white", label="samples")
    lo, hi = np.quantile(samples, 0.001), np.quantile(samples, 0.999)
    pad = 0.1 * (hi - lo)
    x = np.linspace(max(lo - pad, 1e-9), hi + pad, 400)
    ax.plot(x, dist.pdf(x), color="#08519c", lw=2, label="fit")
    if scalar_marker is not None:
        ax.axvline(scalar_marker, color="red", lw=1.5, ls="--", label="scalar default")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    return _save(fig, path)


def ecdf_figure(sides: dict[str, np.ndarray], path: str | Path, xlabel: str) -> Path:
    """Step ECDFs of one or more duration samples on a shared axis."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for label, values in sides.items():
        e = ecdf(values)
        ax.step(
            np.concatenate([[e.values[0]], e.values]),
            np.concatenate([[0.0], e.fractions]),
            where="post",
            label=f"{label} (n={len(e.values)})",
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("cumulative fraction")
    ax.set_ylim(0, 1.02)
    ax.legend(frameon=False, loc="lower right")
    return _save(fig, path)


def kinematics_hist_figure(
    hists: KinematicsHistograms,
    path: str | Path,
    accel_marker: float | None = None,
    speed_marker: float | None = None,
) -> Path:
    """Per-cyclist observed maxima: acceleration and speed, side by side."""
    fig, (ax_a, ax_v) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax_a.bar(
        hists.accel_hist.bin_edges[:-1],
        hists.accel_hist.counts,
        width=np.diff(hists.accel_hist.bin_edges),
        align="edge",
        color="#a1d99b",
        edgecolor="white",
    )
    if accel_marker is not None:
        ax_a.axvline(accel_marker, color="red", lw=1.5, ls="--")
    ax_a.set_xlabel("observed max acceleration [m/s$^2$]")
    ax_a.set_ylabel("cyclists")

    ax_v.bar(
        hists.speed_hist.bin_edges[:-1],
        hists.speed_hist.counts,
        width=np.diff(hists.speed_hist.bin_edges),
        align="edge",
        color="#9ecae1",
        edgecolor="white",
    )
    if speed_marker is not None:
        ax_v.axvline(speed_marker, color="red", lw=1.5, ls="--")
    ax_v.set_xlabel("observed max speed [m/s]")
    ax_v.set_ylabel("cyclists")
    return _save(fig, path)


def trajectory_figure(net: Network, trajectories: list[Trajectory], path: str | Path) -> Path:
    """Top-down view of the intersection with synthesized turn paths."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    xmin, xmax, ymin, ymax = net.conflict_bounds()
    ax.add_patch(
        plt.Rectangle(
            (xmin, ymin), xmax - xmin, ymax - ymin, fill=False, ls=":", color="gray", lw=1
        )
    )
    reach = max(net.stop_line_distance(h) for h in net.approaches) + 12.0
    for lo, hi, axis in ((xmin, xmax, "x"), (ymin, ymax, "y")):
        for edge in (lo, hi):
            if axis == "x":
                ax.plot([edge, edge], [-reach, ymin], color="0.7", lw=1)
                ax.plot([edge, edge], [ymax, reach], color="0.7", lw=1)
            else:
                ax.plot([-reach, xmin], [edge, edge], color="0.7", lw=1)
                ax.plot([xmax, reach], [edge, edge], color="0.7", lw=1)
    colors = {"direct": "#d95f02", "indirect": "#1b9e77", "through": "#7570b3"}
    for traj in trajectories:
        ax.plot(
            traj.polyline[:, 0],
            traj.polyline[:, 1],
            color=colors.get(traj.kind, "black"),
            lw=2,
            label=traj.kind,
        )
        if traj.waiting_node_index is not None:
            node = traj.polyline[traj.waiting_node_index]
            ax.plot(node[0], node[1], "o", color=colors.get(traj.kind, "black"), ms=7)
    handles, labels = ax.get_legend_handles_labels()
    uniq = dict(zip(labels, handles))
    ax.legend(uniq.values(), uniq.keys(), frameon=False, loc="upper left")
    ax.set_aspect("equal")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    return _save(fig, path)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
