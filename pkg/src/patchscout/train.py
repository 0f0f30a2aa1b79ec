"""Dataset handling and the training harness.

Datasets are JSONL: one commit per line with per-file old/new sources (or
pre-parsed AST-JSON).  Splitting is cross-project: no project contributes
commits to both sides.  Training preprocesses every commit into a featured
graph once, then runs Adam (or SGD with momentum) over shuffled batches;
the checkpoint with the lowest validation loss on a project-held-out slice
of the training data wins.  Everything is deterministic given the seeds.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .alpha_ast import (
    DEFAULT_DICE_THRESHOLD,
    DEFAULT_MAX_GRAPH_NODES,
    AlphaAst,
    build_alpha_ast,
    changed_line_count,
    match_nodes,
    merge_commit_graph,
    truncate_to_changed_context,
)
from .ast_core import Ast, ingest_ast_json, parse_source
from .embedding import EmbeddingTable, SkipGramConfig, assemble_features, build_corpus, train_skipgram
from .errors import (
    DatasetParseError,
    DuplicateIdError,
    SingleClassDatasetError,
    TooFewProjectsError,
)
from .eval_metrics import ScoredCommit, confusion, prf1
from .gat_model import (
    GatConfig,
    GatModel,
    GraphInput,
    from_alpha,
    init_model,
    loss_and_gradients,
    predict,
    sample_loss,
    _forward,
)

LABEL_FIXING = 1
LABEL_NON_FIXING = 0


@dataclass(frozen=True)
class FileChange:
    path: str
    old: str | dict     # source text, or {"ast": <AST-JSON object>}
    new: str | dict


@dataclass(frozen=True)
class CommitSample:
    id: str
    project: str
    label: int
    files: tuple[FileChange, ...]
    split: str | None = None       # optional pre-split tag: "train" | "test"


@dataclass
class Dataset:
    samples: list[CommitSample]
    split_tag: str = "none"

    def __len__(self) -> int:
        return len(self.samples)

    def projects(self) -> list[str]:
        return sorted({s.project for s in self.samples})

    def labels(self) -> list[int]:
        return [s.label for s in self.samples]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    seed: int = 42
    optimizer: str = "adam"        # "adam" | "sgd-momentum"


# --- dataset jsonl ------------------------------------------------------------------


def _parse_file_entry(entry, line_no: int) -> FileChange:
    if not isinstance(entry, dict):
        raise DatasetParseError("file entry must be an object", line_no)
    path = entry.get("path")
    if not isinstance(path, str) or not path:
        raise DatasetParseError("file entry needs a non-empty 'path'", line_no)
    versions = []
    for key in ("old", "new"):
        value = entry.get(key)
        if isinstance(value, str):
            versions.append(value)
        elif isinstance(value, dict) and "ast" in value:
            versions.append(value)
        else:
            raise DatasetParseError(
                f"file entry '{key}' must be source text or {{\"ast\": ...}}", line_no)
    return FileChange(path, versions[0], versions[1])


def load_dataset(path: str) -> Dataset:
    """Read and validate a JSONL dataset; malformed lines name their line number."""
    samples: list[CommitSample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"invalid JSON: {exc}", line_no) from None
            if not isinstance(obj, dict):
                raise DatasetParseError("line must be a JSON object", line_no)
            cid = obj.get("id")
            if not isinstance(cid, str) or not cid:
                raise DatasetParseError("missing commit 'id'", line_no)
            if cid in seen:
                raise DuplicateIdError(f"duplicate commit id {cid!r} at line {line_no}")
            seen.add(cid)
            project = obj.get("project")
            if not isinstance(project, str) or not project:
                raise DatasetParseError("missing 'project'", line_no)
            label = obj.get("label")
            if label not in (0, 1):
                raise DatasetParseError("'label' must be 0 or 1", line_no)
            raw_files = obj.get("files")
            if not isinstance(raw_files, list) or not raw_files:
                raise DatasetParseError("'files' must be a non-empty array", line_no)
            files = tuple(_parse_file_entry(e, line_no) for e in raw_files)
            split = obj.get("split")
            if split is not None and split not in ("train", "test"):
                raise DatasetParseError("'split' must be \"train\" or \"test\"", line_no)
            samples.append(CommitSample(cid, project, label, files, split))
    return Dataset(samples)


def save_dataset(ds: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in ds.samples:
            obj = {
                "id": s.id, "project": s.project, "label": s.label,
                "files": [{"path": f.path, "old": f.old, "new": f.new}
                          for f in s.files],
            }
            if s.split:
                obj["split"] = s.split
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


# --- splitting ----------------------------------------------------------------------


def cross_project_split(ds: Dataset, train_fraction: float,
                        seed: int) -> tuple[Dataset, Dataset]:
    """Project-granularity split: shuffle projects by seed, cut at
    ceil(fraction * P), clamped so the test side keeps at least one project."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    projects = ds.projects()
    if len(projects) < 2:
        raise TooFewProjectsError(
            f"cross-project split needs >= 2 projects, have {len(projects)}")
    rng = np.random.default_rng(seed)
    order = [projects[i] for i in rng.permutation(len(projects))]
    cut = min(math.ceil(train_fraction * len(projects)), len(projects) - 1)
    train_projects = set(order[:cut])
    train = [s for s in ds.samples if s.project in train_projects]
    test = [s for s in ds.samples if s.project not in train_projects]
    return Dataset(train, "train"), Dataset(test, "test")


def split_by_tags(ds: Dataset) -> tuple[Dataset, Dataset] | None:
    """Use per-sample split tags when every sample carries one, else None."""
    if any(s.split is None for s in ds.samples):
        return None
    train = [s for s in ds.samples if s.split == "train"]
    test = [s for s in ds.samples if s.split == "test"]
    return Dataset(train, "train"), Dataset(test, "test")


def sensitivity_folds(train: Dataset, k: int, seed: int) -> list[Dataset]:
    """k cumulative nested datasets D1 c D2 c ... c Dk = train (sample folds)."""
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(train.samples))
    n = len(order)
    out: list[Dataset] = []
    for i in range(1, k + 1):
        upper = (n * i) // k
        out.append(Dataset([train.samples[j] for j in order[:upper]], "train"))
    return out


def sample_changed_loc(sample: CommitSample) -> int:
    """Added+deleted lines summed over the commit's text file pairs."""
    total = 0
    for f in sample.files:
        if isinstance(f.old, str) and isinstance(f.new, str):
            total += changed_line_count(f.old, f.new)
    return total


def change_size_bins(ds: Dataset, edges: list[int]) -> list[Dataset]:
    """Partition by changed LOC into [0,e1), [e1,e2), ..., [e_last, inf)."""
    if list(edges) != sorted(set(edges)):
        raise ValueError(f"bin edges must be strictly increasing, got {edges}")
    bins: list[list[CommitSample]] = [[] for _ in range(len(edges) + 1)]
    for s in ds.samples:
        loc = sample_changed_loc(s)
        idx = 0
        while idx < len(edges) and loc >= edges[idx]:
            idx += 1
        bins[idx].append(s)
    return [Dataset(b, ds.split_tag) for b in bins]


# --- commit -> graph pipeline ----------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    dice_threshold: float = DEFAULT_DICE_THRESHOLD
    max_graph_nodes: int = DEFAULT_MAX_GRAPH_NODES


def _file_ast(version: str | dict, path: str) -> tuple[Ast, str | None]:
    if isinstance(version, str):
        return parse_source(version, path), version
    return ingest_ast_json(json.dumps(version["ast"])), None


def commit_graph(sample: CommitSample,
                 pipeline: PipelineConfig = PipelineConfig()) -> AlphaAst:
    """parse/ingest -> match -> annotate -> merge -> cap, for one commit."""
    per_file = []
    for f in sample.files:
        old_ast, old_text = _file_ast(f.old, f.path)
        new_ast, new_text = _file_ast(f.new, f.path)
        mapping = match_nodes(old_ast, new_ast, pipeline.dice_threshold)
        per_file.append(build_alpha_ast(old_ast, new_ast, mapping, old_text, new_text))
    merged = merge_commit_graph(per_file)
    return truncate_to_changed_context(merged, pipeline.max_graph_nodes)


_WORKER_PIPELINE = PipelineConfig()


def _graph_worker(sample: CommitSample) -> AlphaAst:
    return commit_graph(sample, _WORKER_PIPELINE)


def commit_graphs(samples: list[CommitSample],
                  pipeline: PipelineConfig = PipelineConfig(),
                  jobs: int = 1) -> list[AlphaAst]:
    """Per-commit graphs, optionally in parallel; output order == input order."""
    if jobs <= 1 or len(samples) < 4:
        return [commit_graph(s, pipeline) for s in samples]
    global _WORKER_PIPELINE
    _WORKER_PIPELINE = pipeline
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_graph_worker, samples, chunksize=8))


def featured_graphs(samples: list[CommitSample], table: EmbeddingTable,
                    pipeline: PipelineConfig = PipelineConfig(),
                    jobs: int = 1) -> list[GraphInput]:
    graphs = commit_graphs(samples, pipeline, jobs)
    return [from_alpha(g, assemble_features(g, table), s.label)
            for g, s in zip(graphs, samples)]


# --- optimizers --------------------------------------------------------------------------


class _Adam:
    def __init__(self, model: GatModel, lr: float, weight_decay: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = model.parameters()
        self.lr = lr
        self.wd = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {name: np.zeros_like(p) for name, p in self.params}
        self.v = {name: np.zeros_like(p) for name, p in self.params}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in self.params:
            g = grads[name].reshape(p.shape) + self.wd * p
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1 - self.beta2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _SgdMomentum:
    def __init__(self, model: GatModel, lr: float, weight_decay: float,
                 momentum: float = 0.9):
        self.params = model.parameters()
        self.lr = lr
        self.wd = weight_decay
        self.momentum = momentum
        self.buf = {name: np.zeros_like(p) for name, p in self.params}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, p in self.params:
            g = grads[name].reshape(p.shape) + self.wd * p
            self.buf[name] = self.momentum * self.buf[name] + g
            p -= self.lr * self.buf[name]


def _make_optimizer(model: GatModel, cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return _Adam(model, cfg.learning_rate, cfg.weight_decay)
    if cfg.optimizer == "sgd-momentum":
        return _SgdMomentum(model, cfg.learning_rate, cfg.weight_decay)
    raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


# --- training loop ------------------------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    loss: float
    f1: float
    val_loss: float


def _mean_loss(model: GatModel, graphs: list[GraphInput], pos_weight: float) -> float:
    total = 0.0
    for g in graphs:
        logit, _ = _forward(model, g)
        total += sample_loss(logit, g.label, pos_weight)
    return total / len(graphs)


def _train_f1(model: GatModel, graphs: list[GraphInput], threshold: float = 0.5) -> float:
    scored = [ScoredCommit(str(i), predict(model, g), g.label, 0)
              for i, g in enumerate(graphs)]
    _, _, f1 = prf1(confusion(scored, threshold))
    return f1


def _validation_split(train: Dataset, seed: int) -> tuple[list[int], list[int]]:
    """Indices of (inner-train, validation); project-held-out when possible."""
    n = len(train.samples)
    if len(train.projects()) >= 2:
        inner_ds, val_ds = cross_project_split(train, 0.9, seed)
        val_ids = {s.id for s in val_ds.samples}
        inner = [i for i, s in enumerate(train.samples) if s.id not in val_ids]
        val = [i for i, s in enumerate(train.samples) if s.id in val_ids]
        labels = {train.samples[i].label for i in inner}
        if len(labels) == 2 and val:
            return inner, val
    # sample-level fallback: shuffled 90/10 (keeps both classes if possible)
    rng = np.random.default_rng(seed + 1)
    order = list(rng.permutation(n))
    cut = max(1, int(0.9 * n)) if n > 1 else n
    inner, val = order[:cut], order[cut:]
    if len({train.samples[i].label for i in inner}) < 2:
        return list(range(n)), list(range(n))
    return inner, (val or inner)


def _clone_params(model: GatModel) -> dict[str, np.ndarray]:
    return {name: p.copy() for name, p in model.parameters()}


def _restore_params(model: GatModel, snapshot: dict[str, np.ndarray]) -> None:
    for name, p in model.parameters():
        p[...] = snapshot[name]


def train_model(train: Dataset, cfg: TrainConfig, table: EmbeddingTable,
                model_config: GatConfig | None = None,
                pipeline: PipelineConfig = PipelineConfig(),
                jobs: int = 1,
                quiet: bool = True) -> tuple[GatModel, list[EpochStats]]:
    """Full training run; returns the best-validation-loss checkpoint and history."""
    if not train.samples:
        raise SingleClassDatasetError("training set is empty")
    label_set = set(train.labels())
    if len(label_set) < 2:
        raise SingleClassDatasetError(
            f"training set has a single class {label_set}; need both")

    inner_idx, val_idx = _validation_split(train, cfg.seed)
    graphs = featured_graphs(train.samples, table, pipeline, jobs)
    inner = [graphs[i] for i in inner_idx]
    val = [graphs[i] for i in val_idx]

    positives = sum(1 for g in inner if g.label == 1)
    negatives = len(inner) - positives
    pos_weight = negatives / positives if positives else 1.0

    if model_config is None:
        model_config = GatConfig(d_in=table.dim + 3, seed=cfg.seed)
    model = init_model(model_config)
    optimizer = _make_optimizer(model, cfg)

    history: list[EpochStats] = []
    best_val = math.inf
    best_snapshot = _clone_params(model)
    best_epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        rng = np.random.default_rng((cfg.seed, epoch))
        order = rng.permutation(len(inner))
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [inner[i] for i in order[start:start + cfg.batch_size]]
            loss, grads = loss_and_gradients(model, batch, pos_weight)
            optimizer.step(grads)
            epoch_loss += loss
            batches += 1
        mean_loss = epoch_loss / batches
        f1 = _train_f1(model, inner)
        val_loss = _mean_loss(model, val, pos_weight)
        history.append(EpochStats(epoch, mean_loss, f1, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_snapshot = _clone_params(model)
            best_epoch = epoch
        if not quiet:
            print(f"epoch {epoch:3d}  loss {mean_loss:.4f}  "
                  f"train_f1 {f1:.3f}  val_loss {val_loss:.4f}")
    _restore_params(model, best_snapshot)
    if not quiet:
        print(f"best epoch {best_epoch} (val_loss {best_val:.4f})")
    return model, history


def best_epoch(history: list[EpochStats]) -> int:
    return min(history, key=lambda h: h.val_loss).epoch


def write_history_csv(path: str, history: list[EpochStats]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "f1", "val_loss"])
        for h in history:
            writer.writerow([h.epoch, repr(h.loss), repr(h.f1), repr(h.val_loss)])


def train_embeddings(train: Dataset, sg_config: SkipGramConfig,
                     pipeline: PipelineConfig = PipelineConfig(),
                     jobs: int = 1) -> EmbeddingTable:
    """Corpus from the training split only (no test leakage), then skip-gram."""
    graphs = commit_graphs(train.samples, pipeline, jobs)
    corpus = build_corpus(graphs, sg_config.min_count)
    return train_skipgram(corpus, sg_config)


def score_dataset(model: GatModel, table: EmbeddingTable, ds: Dataset,
                  pipeline: PipelineConfig = PipelineConfig(),
                  jobs: int = 1) -> list[ScoredCommit]:
    graphs = commit_graphs(ds.samples, pipeline, jobs)
    out: list[ScoredCommit] = []
    for sample, graph in zip(ds.samples, graphs):
        features = assemble_features(graph, table)
        g = from_alpha(graph, features, sample.label)
        out.append(ScoredCommit(sample.id, predict(model, g), sample.label,
                                graph.changed_loc))
    return out
