"""Markdown and CSV summaries of training runs."""
from __future__ import annotations

import csv

from .experiment import SeedRun, mean_sem

SEED_FIELDS = ("seed", "lr", "layers", "dropout", "best_epoch", "val_acc", "test_acc", "sim_raw", "sim_learned")

FIGURES = {
    "accuracy": "accuracy_per_seed.png",
    "sim_mean": "sim_mean.png",
    "loss": "loss_curves.png",
}


def seed_rows(runs: list[SeedRun]) -> list[dict]:
    rows = []
    for r in runs:
        rec = r.result.best_record
        rows.append({"seed": r.seed, "lr": rec.hyper["lr"], "layers": rec.hyper["layers"],
                     "dropout": rec.hyper["dropout"], "best_epoch": rec.best_epoch,
                     "val_acc": rec.acc["val"], "test_acc": rec.acc["test"],
                     "sim_raw": r.sim_raw, "sim_learned": r.sim_learned})
    return rows


def write_seed_csv(runs, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SEED_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in seed_rows(runs):
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) and k not in ("lr", "dropout") else v)
                        for k, v in row.items()})


def _pm(values, scale=1.0, digits=2) -> str:
    m, s = mean_sem([v * scale for v in values])
    return f"{m:.{digits}f} ± {s:.{digits}f}"


def render_report(runs: list[SeedRun], *, arch: str, graph_name: str, dec_name: str | None,
                  grid: bool, figures: bool = True) -> str:
    rows = seed_rows(runs)
    lines = [
        f"# Node classification: {arch}",
        "",
        f"- graph: `{graph_name}`",
        f"- decomposition: `{dec_name}`" if dec_name else "- decomposition: none (single edge type)",
        f"- selection: {'full grid, best validation accuracy' if grid else 'single configuration'}",
        f"- seeds: {', '.join(str(r['seed']) for r in rows)}",
        "",
        "## Summary",
        "",
        "| metric | mean ± SEM |",
        "|---|---|",
        f"| test accuracy (%) | {_pm([r['test_acc'] for r in rows], 100)} |",
        f"| validation accuracy (%) | {_pm([r['val_acc'] for r in rows], 100)} |",
        f"| Sim_mean, raw features | {_pm([r['sim_raw'] for r in rows], digits=4)} |",
        f"| Sim_mean, learned representations | {_pm([r['sim_learned'] for r in rows], digits=4)} |",
        "",
        "Sim_mean is the mean cosine similarity between class prototypes; lower separates classes better.",
        "",
        "## Per seed",
        "",
        "| seed | lr | layers | dropout | best epoch | val acc (%) | test acc (%) | Sim_mean raw | Sim_mean learned |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for r in rows:
        lines.append(f"| {r['seed']} | {r['lr']:g} | {r['layers']} | {r['dropout']:g} | {r['best_epoch']} | "
                     f"{100 * r['val_acc']:.2f} | {100 * r['test_acc']:.2f} | "
                     f"{r['sim_raw']:.4f} | {r['sim_learned']:.4f} |")
    if figures:
        lines += ["", "## Figures", ""]
        lines += [f"![{key}]({name})" for key, name in FIGURES.items()]
    return "\n".join(lines) + "\n"
