"""Report figures written next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_threshold_curve(thresholds, fractions, path, label=None):
    """Fraction of frames with every joint under the threshold, in percent."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(thresholds, 100 * np.asarray(fractions), lw=1.8, label=label)
    ax.set_xlabel("maximum allowed distance to GT (mm)")
    ax.set_ylabel("frames within distance (%)")
    ax.set_xlim(float(np.min(thresholds)), float(np.max(thresholds)))
    ax.set_ylim(0, 100)
    ax.grid(alpha=0.3)
    if label:
        ax.legend(loc="lower right")
    _save(fig, path)


def plot_per_joint_error(per_joint, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    idx = np.arange(len(per_joint))
    ax.bar(idx, per_joint, color="0.4")
    ax.axhline(float(np.mean(per_joint)), color="C3", lw=1, ls="--", label="mean")
    ax.set_xlabel("joint")
    ax.set_ylabel("mean error (mm)")
    ax.legend()
    _save(fig, path)


def plot_loss_trace(trace, path):
    """Log-scale objective and its four parts against iteration."""
    trace = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = ("L_uv", "L_d", "L_H", "L_D", "total")
    for col, name in enumerate(names, start=1):
        y = trace[:, col]
        if np.any(y > 0):
            ax.semilogy(trace[:, 0], np.where(y > 0, y, np.nan), lw=2.2 if name == "total" else 1,
                        label=name, color="k" if name == "total" else None)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_representation(frame, heatmap, depthmap, path, joint=None):
    """Depth frame, heatmap and offset map side by side for one joint."""
    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    panels = [(frame, "depth frame", "gray_r"), (heatmap, "heatmap", "viridis"), (depthmap, "offset map", "coolwarm")]
    for ax, (grid, title, cmap) in zip(axes, panels):
        grid = np.asarray(grid)
        kw = {}
        if cmap == "coolwarm":
            lim = float(np.max(np.abs(grid))) or 1.0
            kw = {"vmin": -lim, "vmax": lim}
        im = ax.imshow(grid, cmap=cmap, **kw)
        ax.set_title(title if joint is None else f"{title} (joint {joint})", fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    _save(fig, path)
