"""Figures from reports, run logs and inference dumps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PNG_META = {"Software": None}


class PlotInputError(KeyError):
    """A report or dump lacks a field the figure needs."""

    def __init__(self, field, source="input"):
        super().__init__(f"{source} is missing field '{field}'")
        self.field = field

    def __str__(self):
        return self.args[0]


def _need(d, key, source):
    if not isinstance(d, dict) or key not in d or d[key] is None:
        raise PlotInputError(key, source)
    return d[key]


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=80, metadata=PNG_META)
    plt.close(fig)
    return path


def plot_recall(reports: dict, path, title="plane recall vs. depth threshold"):
    """``reports``: label -> report dict (as from ``read_report``) with a ``depth_recall`` record."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    for label, rep in reports.items():
        curve = _need(rep, "depth_recall", f"report '{label}'")
        thr = _need(curve, "thresholds", f"report '{label}' depth_recall")
        axes[0].plot(thr, _need(curve, "plane_recall", f"report '{label}' depth_recall"), marker="o", ms=3, label=label)
        axes[1].plot(thr, _need(curve, "pixel_recall", f"report '{label}' depth_recall"), marker="o", ms=3, label=label)
    for ax, name in zip(axes, ("per-plane recall", "per-pixel recall")):
        ax.set_xlabel("depth threshold (m)")
        ax.set_ylabel(name)
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=7)
    fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def plot_losses(records: list, path, keys=("total", "cls", "param", "embed_pull", "embed_push", "depth")):
    """Per-epoch loss curves from run-log records."""
    epochs = [r for r in records if r.get("type") == "epoch"]
    if not epochs:
        raise PlotInputError("epoch", "run log")
    fig, ax = plt.subplots(figsize=(5, 3.2))
    x = [_need(r, "epoch", "epoch record") for r in epochs]
    for k in keys:
        ax.plot(x, [_need(r, k, "epoch record") for r in epochs], label=k)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def label_colors(n, seed=3):
    rng = np.random.default_rng(seed)
    colors = rng.uniform(0.15, 1.0, size=(n + 1, 3))
    colors[0] = 0.0
    return colors


def plot_mask_overlay(image, mask, path, lines=None, alpha=0.5):
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask)
    if image.shape[:2] != mask.shape:
        raise ValueError(f"image {image.shape[:2]} and mask {mask.shape} differ in size")
    colors = label_colors(int(mask.max()) if mask.size else 0)
    over = np.where((mask > 0)[..., None], (1 - alpha) * image + alpha * colors[mask], image)
    fig, ax = plt.subplots(figsize=(4, 4 * mask.shape[0] / mask.shape[1]))
    ax.imshow(np.clip(over, 0, 1), interpolation="nearest")
    if lines is not None:
        for x1, y1, x2, y2 in np.asarray(lines).reshape(-1, 4):
            ax.plot([x1, x2], [y1, y2], color="yellow", lw=1)
    ax.set_axis_off()
    fig.tight_layout(pad=0)
    return _save(fig, path)


def plot_attention(image, dump: dict, path, max_instances=4):
    """Context attention heatmaps (and line weights drawn as segment width) per kept instance."""
    ctx = np.asarray(_need(dump, "context_attention", "attention dump"))
    if ctx.ndim != 3:
        raise ValueError(f"context_attention must be kept x h x w, got {ctx.shape}")
    line_w = dump.get("line_attention")
    lines = dump.get("lines")
    n = min(len(ctx), max_instances)
    image = np.asarray(image, dtype=np.float64)
    H, W = image.shape[:2]
    fig, axes = plt.subplots(1, max(n, 1), figsize=(3 * max(n, 1), 3 * H / W), squeeze=False)
    if n == 0:
        axes[0, 0].imshow(image, interpolation="nearest")
        axes[0, 0].set_title("no kept instances", fontsize=8)
        axes[0, 0].set_axis_off()
    for i in range(n):
        ax = axes[0, i]
        ax.imshow(image, interpolation="nearest")
        ax.imshow(ctx[i], cmap="magma", alpha=0.55, extent=(0, W, H, 0), interpolation="bilinear")
        if lines is not None and line_w is not None and np.size(line_w):
            w = np.asarray(line_w)[i]
            w = w / (w.max() + 1e-12)
            for (x1, y1, x2, y2), wi in zip(np.asarray(lines).reshape(-1, 4), w):
                ax.plot([x1, x2], [y1, y2], color="cyan", lw=0.5 + 3 * wi, alpha=0.3 + 0.7 * wi)
        ax.set_title(f"instance {i + 1}", fontsize=8)
        ax.set_axis_off()
    fig.tight_layout()
    return _save(fig, path)
