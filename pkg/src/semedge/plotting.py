"""Report figures, rendered off-screen to PNG files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps reruns byte-identical
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_accuracy_per_seed(runs, path, title: str = "") -> None:
    seeds = [r.seed for r in runs]
    x = range(len(runs))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(x, [100 * r.result.best_record.acc["val"] for r in runs], "o-", label="val")
    ax.plot(x, [100 * r.result.best_record.acc["test"] for r in runs], "s-", label="test")
    ax.set_xticks(list(x), [str(s) for s in seeds])
    ax.set_xlabel("seed")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_sim_mean(runs, path) -> None:
    seeds = [r.seed for r in runs]
    width = 0.4
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = list(range(len(runs)))
    ax.bar([i - width / 2 for i in x], [r.sim_raw for r in runs], width, label="raw features")
    ax.bar([i + width / 2 for i in x], [r.sim_learned for r in runs], width, label="learned")
    ax.set_xticks(x, [str(s) for s in seeds])
    ax.set_xlabel("seed")
    ax.set_ylabel("mean prototype cosine")
    ax.legend()
    _save(fig, path)


def plot_loss_curves(runs, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for r in runs:
        ax.plot(r.result.best_record.losses, lw=1, label=f"seed {r.seed}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("train loss")
    if len(runs) <= 10:
        ax.legend(fontsize="small")
    _save(fig, path)
