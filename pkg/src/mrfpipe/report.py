"""Matplotlib figure rendering for CLI reports.

Figures accompany the delimited outputs; they are rendered through the
Agg backend with metadata stripped so a repeated run writes identical
bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .images import ParametricMaps  # noqa: E402

# PNG tEXt chunks carry the matplotlib version and a timestamp by default;
# pin them so re-runs are byte-identical.
_SAVEFIG = {"dpi": 110, "metadata": {"Software": None, "Creation Time": None}}

_CHANNEL_LABELS = (("t1_ms", "T1 (ms)"), ("t2_ms", "T2 (ms)"), ("pd", "PD"))


def save_map_figure(path, maps: ParametricMaps, title: str = "") -> None:
    """Three-panel map view with per-channel colorbars."""
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.6))
    for ax, (channel, label) in zip(axes, _CHANNEL_LABELS):
        im = ax.imshow(getattr(maps, channel), cmap="viridis", interpolation="nearest")
        ax.set_title(label)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVEFIG)
    plt.close(fig)


def save_comparison_figure(path, truth: ParametricMaps, predicted: ParametricMaps,
                           method: str = "predicted") -> None:
    """Truth / prediction / absolute-error grid, one row per channel."""
    fig, axes = plt.subplots(3, 3, figsize=(10.5, 10.0))
    for row, (channel, label) in enumerate(_CHANNEL_LABELS):
        t = getattr(truth, channel)
        p = getattr(predicted, channel)
        vmax = max(float(t.max()), float(p.max()), 1e-12)
        panels = ((t, f"truth {label}", vmax), (p, f"{method} {label}", vmax),
                  (abs(p - t), f"|error| {label}", None))
        for col, (img, name, top) in enumerate(panels):
            ax = axes[row, col]
            im = ax.imshow(img, cmap="viridis", vmin=0.0, vmax=top,
                           interpolation="nearest")
            ax.set_title(name, fontsize=9)
            ax.set_xticks([])
            ax.set_yticks([])
            fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVEFIG)
    plt.close(fig)


def save_loss_figure(path, records) -> None:
    """Training/validation loss curves from TrainRecord rows."""
    epochs = [r.epoch for r in records]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(epochs, [r.train_loss for r in records], label="train")
    val = [(r.epoch, r.val_loss) for r in records if r.val_loss is not None]
    if val:
        ax.plot([e for e, _ in val], [v for _, v in val], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("masked MSE")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVEFIG)
    plt.close(fig)


def save_bench_figure(path, rows) -> None:
    """Bar chart of per-method seconds from (method, seconds) pairs."""
    methods = [m for m, _ in rows]
    seconds = [s for _, s in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar(methods, seconds, color="#3b6ea5")
    ax.set_ylabel("seconds")
    ax.set_yscale("log")
    for i, s in enumerate(seconds):
        ax.text(i, s, f"{s:.2f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVEFIG)
    plt.close(fig)
