"""Report figures rendered to files (Agg backend, no display needed)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

AXES = ("east", "north", "up")


def save_cdf_figure(cdf_by_label, path, title="Positioning error CDF"):
    """cdf_by_label: {label: [(error m, cumulative fraction), ...]}."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, cdf in cdf_by_label.items():
        xs = [c[0] for c in cdf]
        ys = [c[1] for c in cdf]
        ax.step(xs, ys, where="post", label=label)
    ax.set_xlabel("error [m]")
    ax.set_ylabel("cumulative fraction")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_error_axes_figure(times, per_axis, path, title="Per-axis error"):
    """per_axis: {axis: signed error series} with axes east/north/up."""
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    for ax, name in zip(axes, AXES):
        series = per_axis.get(name, [])
        ax.plot(times[:len(series)], series, lw=0.9)
        ax.set_ylabel(f"{name} [m]")
        ax.grid(True, alpha=0.3)
    axes[0].set_title(title)
    axes[-1].set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_trajectory_figure(tracks, path, title="Trajectory (ENU)"):
    """tracks: {label: (n, 2+) array of ENU positions}."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for label, pts in tracks.items():
        pts = np.asarray(pts, dtype=float)
        style = "-" if label in ("truth", "fused") else "."
        ax.plot(pts[:, 0], pts[:, 1], style, label=label, ms=3, lw=1)
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.set_title(title)
    ax.axis("equal")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
