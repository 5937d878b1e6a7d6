"""Static figure rendering for scenario reports.

Each writer takes in-memory results and renders one PNG next to the CSV
artifacts.  Rendering is file-only (Agg backend); nothing here is needed for
the numerical outputs and every writer is safe to skip with figures=false.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["save_slab_figure", "save_model_figure", "save_field_figure"]


def save_slab_figure(snapshots, reference, label: str, path) -> None:
    """Panel per snapshot time: u0 of the closure run vs the reference."""
    n = len(snapshots)
    fig, axes = plt.subplots(1, max(n, 1), figsize=(3.2 * max(n, 1), 2.8),
                             sharey=True, squeeze=False)
    for ax, snap in zip(axes[0], snapshots):
        ax.plot(snap.x, snap.values[0], "-", lw=1.2, label=label)
        if reference is not None:
            ref_x, ref_u0 = reference[snap.t]
            ax.plot(ref_x, ref_u0, "k--", lw=0.9, label="reference")
        ax.set_title(f"t = {snap.t:g}")
        ax.set_xlabel("x")
    axes[0, 0].set_ylabel("u0")
    axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_model_figure(x, curves_by_time, path) -> None:
    """Panel per time with the mean solution and its reductions."""
    times = list(curves_by_time)
    fig, axes = plt.subplots(1, len(times), figsize=(3.2 * len(times), 2.8),
                             sharey=True, squeeze=False)
    styles = {"mean": ("k-", 1.4), "foop": ("C0--", 1.1),
              "soop": ("C1-.", 1.1), "soop_crescendo": ("C2:", 1.4)}
    for ax, t in zip(axes[0], times):
        for name, curve in curves_by_time[t].items():
            style, lw = styles.get(name, ("C3-", 1.0))
            ax.plot(x, curve, style, lw=lw, label=name)
        ax.set_title(f"t = {t:g}")
        ax.set_xlabel("x")
    axes[0, 0].set_ylabel("u1")
    axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_field_figure(field, mat, path, floor: float = 1e-8) -> None:
    """Log-scale map of the 2D field (raw CSV values stay linear)."""
    x, y = mat.cell_centers()
    data = np.log10(np.maximum(field.u, floor))
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    im = ax.pcolormesh(x, y, data, shading="nearest", cmap="inferno",
                       vmin=np.log10(floor))
    fig.colorbar(im, ax=ax, label="log10 u0")
    ax.set_xlabel("x [cm]")
    ax.set_ylabel("y [cm]")
    ax.set_title(f"t = {field.t:g}")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
