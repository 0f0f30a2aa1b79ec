"""Sensitivity-analysis reports: CSV tables plus rendered figures.

Two experiments, mirroring the questions a reviewer asks of a commit
classifier:

* training-size sensitivity -- the training split is cut into k cumulative
  folds, one model per fold, all evaluated on the same held-out test split;
* change-size sensitivity -- one model trained on everything, the test
  split binned by changed LOC and scored per bin.

Outputs land in the report directory: training_size.csv / change_size.csv,
the matching PNG figures, and overall_metrics.json for the full test split.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .eval_metrics import ScoredCommit, confusion, evaluate, prf1
from .train import (
    Dataset,
    change_size_bins,
    cross_project_split,
    sample_changed_loc,
    score_dataset,
    sensitivity_folds,
    split_by_tags,
    train_embeddings,
    train_model,
    load_dataset,
)


def spearman_rho(xs: list[float], ys: list[float]) -> float:
    """Rank correlation with average ranks for ties."""

    def ranks(values: list[float]) -> np.ndarray:
        arr = np.asarray(values, dtype=np.float64)
        order = np.argsort(arr, kind="stable")
        out = np.empty(len(arr))
        i = 0
        while i < len(arr):
            j = i
            while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
                j += 1
            out[order[i:j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        return out

    rx, ry = ranks(xs), ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = float(np.sqrt((rx @ rx) * (ry @ ry)))
    return float(rx @ ry) / denom if denom else 0.0


def default_bin_edges(ds: Dataset) -> list[int]:
    """Quartile edges of the changed-LOC distribution (deduplicated)."""
    locs = sorted(sample_changed_loc(s) for s in ds.samples)
    if not locs:
        return [10, 50, 100]
    edges = []
    for q in (0.25, 0.5, 0.75):
        e = locs[min(len(locs) - 1, int(q * len(locs)))]
        if e > 0 and e not in edges:
            edges.append(e)
    return edges or [10, 50, 100]


def fold_metrics(train_ds: Dataset, test_ds: Dataset, cli_config, folds: int,
                 jobs: int = 1, quiet: bool = True) -> list[dict]:
    """Train one model per cumulative fold; evaluate each on the test split."""
    rows = []
    pipeline = cli_config.pipeline_config()
    for i, fold_ds in enumerate(sensitivity_folds(train_ds, folds,
                                                  cli_config.seed), start=1):
        if len(set(fold_ds.labels())) < 2:
            rows.append({"fold": i, "size": len(fold_ds), "precision": 0.0,
                         "recall": 0.0, "f1": 0.0})
            continue
        table = train_embeddings(fold_ds, cli_config.skipgram_config(),
                                 pipeline, jobs)
        model, _ = train_model(fold_ds, cli_config.train_config(), table,
                               cli_config.gat_config(table.dim + 3),
                               pipeline, jobs)
        scored = score_dataset(model, table, test_ds, pipeline, jobs)
        p, r, f1 = prf1(confusion(scored, cli_config.evaluate["threshold"]))
        rows.append({"fold": i, "size": len(fold_ds), "precision": p,
                     "recall": r, "f1": f1})
        if not quiet:
            print(f"fold {i}/{folds}: n={len(fold_ds)} f1={f1:.3f}")
    return rows


def bin_metrics(scored: list[ScoredCommit], test_ds: Dataset,
                edges: list[int], threshold: float) -> list[dict]:
    by_id = {c.id: c for c in scored}
    rows = []
    bins = change_size_bins(test_ds, edges)
    bounds = [0] + list(edges)
    for i, bin_ds in enumerate(bins):
        lo = bounds[i]
        hi = edges[i] if i < len(edges) else None
        subset = [by_id[s.id] for s in bin_ds.samples]
        if subset:
            p, r, f1 = prf1(confusion(subset, threshold))
        else:
            p = r = f1 = 0.0
        rows.append({
            "bin_low": lo, "bin_high": "" if hi is None else hi,
            "count": len(subset),
            "fixing": sum(c.label for c in subset),
            "precision": p, "recall": r, "f1": f1,
        })
    return rows


def _write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _figure_training_size(rows: list[dict], path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sizes = [r["size"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, marker in (("precision", "o"), ("recall", "s"), ("f1", "^")):
        ax.plot(sizes, [r[key] for r in rows], marker=marker, label=key)
    ax.set_xlabel("training commits")
    ax.set_ylabel("score on the test split")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("Sensitivity to training size")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _figure_change_size(rows: list[dict], path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [f"[{r['bin_low']},{r['bin_high'] or 'inf'})" for r in rows]
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax2 = ax.twinx()
    ax2.bar(x, [r["count"] for r in rows], color="lightgray", width=0.6,
            label="commits")
    ax.plot(x, [r["precision"] for r in rows], marker="o", label="precision")
    ax.plot(x, [r["recall"] for r in rows], marker="s", label="recall")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20)
    ax.set_xlabel("changed LOC bin")
    ax.set_ylabel("score")
    ax.set_ylim(-0.02, 1.02)
    ax2.set_ylabel("commits")
    ax.set_zorder(ax2.get_zorder() + 1)
    ax.patch.set_visible(False)
    ax.set_title("Sensitivity to change size")
    handles1, labels1 = ax.get_legend_handles_labels()
    handles2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(handles1 + handles2, labels1 + labels2, loc="center right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def run_report(dataset_path: str, outdir: str, cli_config, folds: int = 5,
               bin_edges: list[int] | None = None, jobs: int = 1,
               quiet: bool = True) -> dict:
    """Run both sensitivity experiments; returns a summary dict."""
    os.makedirs(outdir, exist_ok=True)
    ds = load_dataset(dataset_path)
    tagged = split_by_tags(ds)
    if tagged is not None:
        train_ds, test_ds = tagged
    else:
        train_ds, test_ds = cross_project_split(
            ds, cli_config.train["train_fraction"], cli_config.seed)

    # full-data model once: overall metrics + per-bin scores
    pipeline = cli_config.pipeline_config()
    table = train_embeddings(train_ds, cli_config.skipgram_config(), pipeline, jobs)
    model, _ = train_model(train_ds, cli_config.train_config(), table,
                           cli_config.gat_config(table.dim + 3), pipeline, jobs)
    scored = score_dataset(model, table, test_ds, pipeline, jobs)
    overall = evaluate(scored, cli_config.evaluate["threshold"],
                       tuple(cli_config.evaluate["ce_levels"]))
    with open(os.path.join(outdir, "overall_metrics.json"), "w") as fh:
        fh.write(overall.to_json() + "\n")

    fold_rows = fold_metrics(train_ds, test_ds, cli_config, folds, jobs, quiet)
    _write_csv(os.path.join(outdir, "training_size.csv"), fold_rows)
    _figure_training_size(fold_rows, os.path.join(outdir,
                                                  "sensitivity_training_size.png"))

    edges = bin_edges if bin_edges is not None else default_bin_edges(test_ds)
    bin_rows = bin_metrics(scored, test_ds, edges,
                           cli_config.evaluate["threshold"])
    _write_csv(os.path.join(outdir, "change_size.csv"), bin_rows)
    _figure_change_size(bin_rows, os.path.join(outdir,
                                               "sensitivity_change_size.png"))

    rho = spearman_rho([float(r["fold"]) for r in fold_rows],
                       [r["f1"] for r in fold_rows])
    summary = {
        "overall": overall.to_dict(),
        "fold_f1": [r["f1"] for r in fold_rows],
        "fold_f1_spearman_rho": rho,
        "bin_edges": edges,
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    if not quiet:
        print(f"report written to {outdir} (fold-F1 Spearman rho {rho:.2f})")
    return summary
