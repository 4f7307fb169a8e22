"""Report figures and image files.

Figures use the object-oriented matplotlib API (no pyplot state) and are
saved without the ``Software`` metadata entry so reruns give identical bytes.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure
from PIL import Image

_META = {"Software": None}


def _save(fig: Figure, path) -> None:
    fig.savefig(path, dpi=100, metadata=_META)


def save_png(image, path) -> None:
    """Write an (H, W, 3) float image in [0, 1] as 8-bit RGB."""
    a = np.floor(np.clip(np.asarray(image, dtype=np.float64), 0, 1) * 255 + 0.5).astype(np.uint8)
    Image.fromarray(a, mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def contact_sheet(images, cols: int = 2, pad: int = 2, pad_value: float = 1.0) -> np.ndarray:
    """Tile equally sized images row-major into one image with ``pad`` pixel gutters."""
    images = np.asarray(images)
    n, h, w, c = images.shape
    rows = -(-n // cols)
    sheet = np.full((rows * h + (rows + 1) * pad, cols * w + (cols + 1) * pad, c), pad_value)
    for i, im in enumerate(images):
        r, q = divmod(i, cols)
        y, x = pad + r * (h + pad), pad + q * (w + pad)
        sheet[y:y + h, x:x + w] = im
    return sheet


def plot_training_curves(rows, path, title: str | None = None) -> None:
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, 4)
    fig = Figure(figsize=(8, 3.2))
    ax1, ax2 = fig.subplots(1, 2)
    ax1.plot(rows[:, 0], rows[:, 1], lw=0.8, label="D loss")
    ax1.plot(rows[:, 0], rows[:, 2], lw=0.8, label="G loss")
    ax1.set_xlabel("step")
    ax1.set_ylabel("loss")
    ax1.legend(frameon=False)
    ax2.plot(rows[:, 0], rows[:, 3], lw=0.8, color="k")
    ax2.set_xlabel("step")
    ax2.set_ylabel(r"color histogram $\chi^2$")
    ax2.set_ylim(bottom=0)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_hierarchy(hierarchy, path) -> None:
    """One x-y scatter panel per level, colored by z."""
    n = hierarchy.depth
    fig = Figure(figsize=(2.6 * n, 2.8))
    axes = np.atleast_1d(fig.subplots(1, n))
    for ax, pos, size in zip(axes, hierarchy.positions, hierarchy.level_sizes):
        ax.scatter(pos[:, 0], pos[:, 1], c=pos[:, 2], s=6, cmap="viridis")
        ax.set_title(f"{size} nodes", fontsize=9)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
    fig.suptitle(f"{hierarchy.method} pooling hierarchy", fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def plot_curvature(features, path) -> None:
    fig = Figure(figsize=(7, 2.8))
    ax1, ax2 = fig.subplots(1, 2)
    ax1.hist(features[:, 6], bins=30, color="0.3")
    ax1.set_xlabel("Gaussian curvature")
    ax2.hist(features[:, 7], bins=30, color="0.3")
    ax2.set_xlabel("mean curvature")
    ax1.set_ylabel("faces")
    fig.tight_layout()
    _save(fig, path)
