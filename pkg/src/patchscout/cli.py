"""Command-line frontend.

Subcommands: parse, diff, corpus, train-embed, train, predict, evaluate,
synth, report.  Exit codes: 0 success, 2 input/parse problem, 3 data
validity problem, 4 file-format version mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import BadConfigError, PatchscoutError, SingleClassError
from .embedding import SkipGramConfig
from .gat_model import GatConfig
from .train import PipelineConfig, TrainConfig

_CONFIG_SECTIONS = {
    "seed": int,
    "matcher": {"dice_threshold": float},
    "graph": {"max_nodes": int},
    "embedding": {"dim": int, "window": int, "negatives": int, "epochs": int,
                  "min_count": int, "learning_rate": float, "seed": int},
    "model": {"layers": int, "hidden": int, "mlp_hidden": int, "seed": int},
    "train": {"epochs": int, "batch_size": int, "learning_rate": float,
              "weight_decay": float, "optimizer": str, "train_fraction": float,
              "seed": int},
    "evaluate": {"threshold": float, "ce_levels": list},
}


class CliConfig:
    """Defaults <- config file <- flags, validated; unknown keys rejected."""

    def __init__(self):
        self.seed = 42
        self.dice_threshold = 0.5
        self.max_graph_nodes = 50_000
        self.embedding = {"dim": 64, "window": 5, "negatives": 5, "epochs": 5,
                          "min_count": 2, "learning_rate": 0.025, "seed": None}
        self.model = {"layers": 2, "hidden": 64, "mlp_hidden": 64, "seed": None}
        self.train = {"epochs": 50, "batch_size": 32, "learning_rate": 1e-3,
                      "weight_decay": 1e-5, "optimizer": "adam",
                      "train_fraction": 0.8, "seed": None}
        self.evaluate = {"threshold": 0.5, "ce_levels": [5.0]}

    def apply_file(self, path: str) -> None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise BadConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise BadConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise BadConfigError("config root must be an object")
        for key, value in data.items():
            if key not in _CONFIG_SECTIONS:
                raise BadConfigError(f"unknown config key {key!r}")
            if key == "seed":
                self.seed = int(value)
                continue
            section = _CONFIG_SECTIONS[key]
            if not isinstance(value, dict):
                raise BadConfigError(f"config section {key!r} must be an object")
            for sub, sub_value in value.items():
                if sub not in section:
                    raise BadConfigError(f"unknown config key {key}.{sub}")
            if key == "matcher":
                self.dice_threshold = float(value.get("dice_threshold",
                                                      self.dice_threshold))
            elif key == "graph":
                self.max_graph_nodes = int(value.get("max_nodes",
                                                     self.max_graph_nodes))
            else:
                getattr(self, key).update(value)

    def apply_flags(self, args: argparse.Namespace) -> None:
        if getattr(args, "seed", None) is not None:
            self.seed = args.seed
        overrides = {
            "dim": ("embedding", "dim"),
            "window": ("embedding", "window"),
            "negatives": ("embedding", "negatives"),
            "embed_epochs": ("embedding", "epochs"),
            "min_count": ("embedding", "min_count"),
            "layers": ("model", "layers"),
            "hidden": ("model", "hidden"),
            "mlp_hidden": ("model", "mlp_hidden"),
            "epochs": ("train", "epochs"),
            "batch_size": ("train", "batch_size"),
            "lr": ("train", "learning_rate"),
            "weight_decay": ("train", "weight_decay"),
            "optimizer": ("train", "optimizer"),
            "train_fraction": ("train", "train_fraction"),
            "threshold": ("evaluate", "threshold"),
            "dice": ("matcher", None),
        }
        for flag, (section, key) in overrides.items():
            value = getattr(args, flag, None)
            if value is None:
                continue
            if flag == "dice":
                self.dice_threshold = value
            else:
                getattr(self, section)[key] = value

    # derived per-module configs (module seeds offset from the global seed)

    def skipgram_config(self) -> SkipGramConfig:
        e = self.embedding
        return SkipGramConfig(dim=e["dim"], window=e["window"],
                              negatives=e["negatives"], epochs=e["epochs"],
                              min_count=e["min_count"],
                              learning_rate=e["learning_rate"],
                              seed=e["seed"] if e["seed"] is not None else self.seed + 1)

    def gat_config(self, d_in: int) -> GatConfig:
        m = self.model
        return GatConfig(d_in=d_in, layers=m["layers"], d_hidden=m["hidden"],
                         mlp_hidden=m["mlp_hidden"],
                         seed=m["seed"] if m["seed"] is not None else self.seed + 2)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"],
                           learning_rate=t["learning_rate"],
                           weight_decay=t["weight_decay"],
                           optimizer=t["optimizer"],
                           seed=t["seed"] if t["seed"] is not None else self.seed + 2)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(self.dice_threshold, self.max_graph_nodes)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON config file (flags win over file values)")
    common.add_argument("--seed", type=int, help="global random seed (default 42)")
    common.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for graph preprocessing")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress output")

    parser = argparse.ArgumentParser(
        prog="patchscout",
        description="Identify silent vulnerability-fixing commits from "
                    "structural code-change graphs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common],
                       help="parse one source file to AST JSON")
    p.add_argument("file")
    p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("diff", parents=[common],
                       help="annotated change graph of two file versions")
    p.add_argument("old_file")
    p.add_argument("new_file")
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--dice", type=float, help="bottom-up Dice threshold (default 0.5)")

    p = sub.add_parser("corpus", parents=[common],
                       help="build the token corpus from a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-count", dest="min_count", type=int)

    p = sub.add_parser("train-embed", parents=[common],
                       help="train skip-gram token embeddings")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--corpus", help="corpus JSON from the corpus subcommand")
    src.add_argument("--dataset", help="dataset JSONL (corpus built on the fly)")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--epochs", dest="embed_epochs", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)

    p = sub.add_parser("train", parents=[common],
                       help="train embeddings and the classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--optimizer", choices=("adam", "sgd-momentum"))
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--embed-epochs", dest="embed_epochs", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--mlp-hidden", dest="mlp_hidden", type=int)

    p = sub.add_parser("predict", parents=[common],
                       help="score commits with a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="scores CSV path")

    p = sub.add_parser("evaluate", parents=[common],
                       help="metrics report from a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--at", default="5",
                   help="comma-separated CE@L percentages (default 5)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", help="also write the report as JSON here")

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic labeled dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--signal", choices=("bounds-check", "off-by-one", "mixed"),
                   default="mixed")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", parents=[common],
                       help="sensitivity analysis: CSV tables plus figures")
    p.add_argument("--dataset", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--bin-edges", dest="bin_edges",
                   help="comma-separated changed-LOC bin edges (default: quartiles)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--embed-epochs", dest="embed_epochs", type=int)
    return parser


def _load_config(args: argparse.Namespace) -> CliConfig:
    cfg = CliConfig()
    if getattr(args, "config", None):
        cfg.apply_file(args.config)
    cfg.apply_flags(args)
    if getattr(args, "min_count", None) is not None:
        cfg.embedding["min_count"] = args.min_count
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _read_source(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


# --- subcommands ------------------------------------------------------------------


def cmd_parse(args) -> int:
    from .ast_core import export_ast_json, parse_source

    text = _read_source(args.file)
    ast = parse_source(text, args.file)
    _emit(export_ast_json(ast), args.out)
    return 0


def cmd_diff(args) -> int:
    from .alpha_ast import diff_asts, export_alpha_dot, export_alpha_json
    from .ast_core import parse_source

    cfg = _load_config(args)
    old_text = _read_source(args.old_file)
    new_text = _read_source(args.new_file)
    old = parse_source(old_text, args.old_file)
    new = parse_source(new_text, args.new_file)
    graph = diff_asts(old, new, old_text, new_text, cfg.dice_threshold)
    render = export_alpha_dot if args.format == "dot" else export_alpha_json
    _emit(render(graph), args.out)
    counts = graph.annotation_counts()
    if not args.quiet:
        print(f"added={counts['A']} deleted={counts['D']} "
              f"unchanged={counts['U']} changed_loc={graph.changed_loc}",
              file=sys.stderr)
    return 0


def cmd_corpus(args) -> int:
    from .embedding import build_corpus
    from .train import commit_graphs, load_dataset

    cfg = _load_config(args)
    ds = load_dataset(args.dataset)
    graphs = commit_graphs(ds.samples, cfg.pipeline_config(), args.jobs)
    corpus = build_corpus(graphs, cfg.embedding["min_count"])
    doc = {"sentences": corpus.sentences,
           "vocab": {t: list(v) for t, v in corpus.vocab.items()}}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
    if not args.quiet:
        print(f"{len(corpus.sentences)} sentences, vocabulary {len(corpus.vocab)}",
              file=sys.stderr)
    return 0


def cmd_train_embed(args) -> int:
    from .embedding import TokenCorpus, build_corpus, train_skipgram
    from .train import commit_graphs, load_dataset

    cfg = _load_config(args)
    if args.corpus:
        with open(args.corpus, encoding="utf-8") as fh:
            doc = json.load(fh)
        corpus = TokenCorpus(doc["sentences"],
                             {t: (v[0], v[1]) for t, v in doc["vocab"].items()})
    else:
        ds = load_dataset(args.dataset)
        graphs = commit_graphs(ds.samples, cfg.pipeline_config(), args.jobs)
        corpus = build_corpus(graphs, cfg.embedding["min_count"])
    table = train_skipgram(corpus, cfg.skipgram_config())
    table.save(args.out)
    if not args.quiet:
        print(f"trained {table.vectors.shape[0]}x{table.dim} embedding table",
              file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    import os

    from .gat_model import save_model
    from .train import (best_epoch, cross_project_split, load_dataset,
                        save_dataset, split_by_tags, train_embeddings,
                        train_model, write_history_csv)

    cfg = _load_config(args)
    ds = load_dataset(args.dataset)
    tagged = split_by_tags(ds)
    if tagged is not None:
        train_ds, test_ds = tagged
    else:
        train_ds, test_ds = cross_project_split(ds, cfg.train["train_fraction"],
                                                cfg.seed)
    os.makedirs(args.outdir, exist_ok=True)
    pipeline = cfg.pipeline_config()
    table = train_embeddings(train_ds, cfg.skipgram_config(), pipeline, args.jobs)
    table.save(os.path.join(args.outdir, "embeddings.psemb"))
    model, history = train_model(train_ds, cfg.train_config(), table,
                                 cfg.gat_config(table.dim + 3), pipeline,
                                 args.jobs, args.quiet)
    epoch = best_epoch(history)
    snapshot = next(h for h in history if h.epoch == epoch)
    save_model(model, os.path.join(args.outdir, "model.psgat"), epoch,
               {"val_loss": snapshot.val_loss, "train_f1": snapshot.f1})
    write_history_csv(os.path.join(args.outdir, "history.csv"), history)
    save_dataset(train_ds, os.path.join(args.outdir, "train_split.jsonl"))
    save_dataset(test_ds, os.path.join(args.outdir, "test_split.jsonl"))
    if not args.quiet:
        print(f"checkpoint from epoch {epoch}; outputs in {args.outdir}",
              file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    from .embedding import EmbeddingTable
    from .errors import VersionMismatchError
    from .eval_metrics import write_scores_csv
    from .gat_model import load_model
    from .train import load_dataset, score_dataset

    cfg = _load_config(args)
    model, header = load_model(args.checkpoint)
    table = EmbeddingTable.load(args.embeddings)
    if model.config.d_in != table.dim + 3:
        raise VersionMismatchError(
            f"checkpoint expects feature dim {model.config.d_in}, "
            f"embeddings provide {table.dim} + 3")
    ds = load_dataset(args.dataset)
    scored = score_dataset(model, table, ds, cfg.pipeline_config(), args.jobs)
    write_scores_csv(args.out, scored)
    if not args.quiet:
        print(f"scored {len(scored)} commits -> {args.out}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    from .eval_metrics import evaluate, read_scores_csv

    cfg = _load_config(args)
    scored = read_scores_csv(args.scores)
    levels = tuple(float(x) for x in args.at.split(","))
    report = evaluate(scored, cfg.evaluate["threshold"], levels)
    print(report.to_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if report.auc is None:
        print("warning: single-class scores, AUC omitted", file=sys.stderr)
        return SingleClassError.exit_code
    return 0


def cmd_synth(args) -> int:
    from .synth import generate_dataset
    from .train import save_dataset

    cfg = _load_config(args)
    ds = generate_dataset(args.n, args.signal, cfg.seed)
    save_dataset(ds, args.out)
    if not args.quiet:
        fixing = sum(ds.labels())
        print(f"wrote {len(ds)} samples ({fixing} fixing) -> {args.out}",
              file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    from .report import run_report

    cfg = _load_config(args)
    edges = None
    if args.bin_edges:
        edges = [int(x) for x in args.bin_edges.split(",")]
    run_report(args.dataset, args.outdir, cfg, folds=args.folds,
               bin_edges=edges, jobs=args.jobs, quiet=args.quiet)
    return 0


_COMMANDS = {
    "parse": cmd_parse,
    "diff": cmd_diff,
    "corpus": cmd_corpus,
    "train-embed": cmd_train_embed,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PatchscoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
