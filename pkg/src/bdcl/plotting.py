"""Figures written next to the CSV/JSON outputs: loss curves per training
phase and coupling-matrix heat maps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COMPONENTS = ("l_ir", "l_ic", "l_cc", "l_p", "l_fd", "l_cd")


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes stable across runs
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_loss_curves(records: list[dict], path) -> Path:
    """Left: pretraining reconstruction loss. Right: clustering-phase terms."""
    pre = [r for r in records if r["phase"] == "pretrain"]
    clu = [r for r in records if r["phase"] == "cluster"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.8))
    if pre:
        ax1.plot([r["epoch"] + 1 for r in pre], [r["l_ir"] for r in pre], color="k", lw=1.2)
    ax1.set_title("pretraining")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("reconstruction loss")
    if clu:
        ep = [r["epoch"] + 1 for r in clu]
        ax2.plot(ep, [r["total"] for r in clu], color="k", lw=1.6, label="total")
        for key in COMPONENTS:
            ax2.plot(ep, [r[key] for r in clu], lw=0.9, label=key)
        ax2.legend(fontsize=7, ncol=2, frameon=False)
    ax2.set_title("clustering phase")
    ax2.set_xlabel("epoch")
    return _finish(fig, path)


def plot_coupling(matrix: np.ndarray, path, title: str = "") -> Path:
    """Heat map of |Gram| entries; brighter means more strongly coupled."""
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(np.abs(matrix), vmin=0.0, vmax=1.0, cmap="viridis")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    ax.set_title(title, fontsize=10)
    ax.set_xticks([])
    ax.set_yticks([])
    return _finish(fig, path)


def plot_ablation(summary: dict[str, dict[str, float]], path) -> Path:
    """Bar chart of mean ACC/NMI per training variant."""
    names = list(summary)
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(1.2 * len(names) + 2, 3.4))
    for off, key in ((-0.18, "acc"), (0.18, "nmi")):
        ax.bar(x + off, [summary[n][key] for n in names], width=0.36, label=key.upper())
    lo = min(min(s["acc"], s["nmi"]) for s in summary.values())
    ax.set_ylim(max(0.0, lo - 0.05), 1.0)
    ax.set_xticks(x, names)
    ax.legend(frameon=False)
    return _finish(fig, path)
