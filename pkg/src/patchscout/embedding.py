"""Token embeddings for change-graph nodes.

Each graph contributes one sentence: the concatenated tokens of its nodes
in graph id order (old-side preorder, then added nodes).  A node's tokens
are its kind plus its label split on underscores and camelCase boundaries,
lowercased.  Vectors are trained with skip-gram and negative sampling;
node features are the mean of the node's token vectors concatenated with
the one-hot change annotation, giving h0 = [content || annotation].
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from .alpha_ast import ANNOTATION_ONE_HOT, AlphaAst
from .errors import DegenerateCorpusError, EmptyCorpusError, VersionMismatchError

UNK_TOKEN = "<UNK>"

_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+|\d+")


def split_label(label: str) -> list[str]:
    """Lowercased subtokens, split on underscores and camelCase boundaries."""
    out: list[str] = []
    for piece in label.split("_"):
        if not piece:
            continue
        parts = _CAMEL_RE.findall(piece)
        if parts:
            out.extend(p.lower() for p in parts)
        else:
            out.append(piece)  # pure punctuation, e.g. operator labels
    return out


def node_tokens(node) -> list[str]:
    """[kind] for unlabeled nodes, [kind, subtoken...] for labeled ones."""
    tokens = [node.kind]
    if node.label:
        tokens.extend(split_label(node.label))
    return tokens


@dataclass
class TokenCorpus:
    sentences: list[list[str]]
    vocab: dict[str, tuple[int, int]]   # token -> (index, frequency)

    def tokens_by_index(self) -> list[str]:
        return sorted(self.vocab, key=lambda t: self.vocab[t][0])

    def counts_by_index(self) -> np.ndarray:
        counts = np.zeros(len(self.vocab), dtype=np.int64)
        for index, freq in self.vocab.values():
            counts[index] = freq
        return counts


def build_corpus(graphs: list[AlphaAst], min_count: int = 2) -> TokenCorpus:
    """One sentence per graph; tokens rarer than min_count become <UNK>.

    Vocabulary indices are dense, by descending frequency then lexicographic
    tie-break.
    """
    sentences: list[list[str]] = []
    freq: dict[str, int] = {}
    for graph in graphs:
        sentence: list[str] = []
        for node in graph.nodes:
            for tok in node_tokens(node):
                sentence.append(tok)
                freq[tok] = freq.get(tok, 0) + 1
        sentences.append(sentence)
    kept = [(t, c) for t, c in freq.items() if c >= min_count]
    kept.sort(key=lambda item: (-item[1], item[0]))
    vocab = {t: (i, c) for i, (t, c) in enumerate(kept)}
    if not vocab:
        raise EmptyCorpusError(
            f"no token appears at least {min_count} times in {len(graphs)} graphs")
    sentences = [[t if t in vocab else UNK_TOKEN for t in s] for s in sentences]
    return TokenCorpus(sentences, vocab)


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 2
    learning_rate: float = 0.025
    seed: int = 42


# --- objective and gradient (single training pair) --------------------------------


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sgns_objective(center: np.ndarray, context: np.ndarray,
                   negatives: np.ndarray) -> float:
    """log s(u_o . v_c) + sum_k log s(-u_k . v_c) for one pair."""
    pos = -np.logaddexp(0.0, -context @ center)
    neg = -np.logaddexp(0.0, negatives @ center) if len(negatives) else 0.0
    return float(pos + np.sum(neg))


def sgns_gradients(center: np.ndarray, context: np.ndarray,
                   negatives: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of sgns_objective w.r.t. (center, context, negatives)."""
    g_pos = 1.0 - _sigmoid(context @ center)            # d/d(u_o . v_c)
    g_center = g_pos * context
    g_context = g_pos * center
    if len(negatives):
        g_neg = -_sigmoid(negatives @ center)           # (k,)
        g_center = g_center + g_neg @ negatives
        g_negatives = np.outer(g_neg, center)
    else:
        g_negatives = np.zeros_like(negatives)
    return g_center, g_context, g_negatives


@dataclass
class EmbeddingTable:
    """token -> d-dimensional vector; unknown tokens map to unk_vector."""

    vectors: np.ndarray                 # (V, d) float64
    unk_vector: np.ndarray              # (d,)
    tokens: list[str]                   # index order
    config: SkipGramConfig
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def vector(self, token: str) -> np.ndarray:
        i = self._index.get(token)
        return self.vectors[i] if i is not None else self.unk_vector

    # binary container: magic, u64le header length, JSON header, float64 data
    MAGIC = b"PSEMB1\n"

    def save(self, path: str) -> None:
        header = json.dumps({
            "d": int(self.dim),
            "V": int(self.vectors.shape[0]),
            "config": asdict(self.config),
            "tokens": self.tokens,
        }, sort_keys=True, separators=(",", ":")).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            fh.write(self.vectors.astype("<f8").tobytes(order="C"))
            fh.write(self.unk_vector.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path: str) -> "EmbeddingTable":
        with open(path, "rb") as fh:
            magic = fh.read(len(cls.MAGIC))
            if magic != cls.MAGIC:
                raise VersionMismatchError(
                    f"{path}: not an embedding table (magic {magic!r})")
            (header_len,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(header_len).decode("utf-8"))
            v, d = header["V"], header["d"]
            data = np.frombuffer(fh.read(v * d * 8), dtype="<f8").reshape(v, d)
            unk = np.frombuffer(fh.read(d * 8), dtype="<f8")
        config = SkipGramConfig(**header["config"])
        return cls(data.astype(np.float64), unk.astype(np.float64),
                   list(header["tokens"]), config)


def train_skipgram(corpus: TokenCorpus, config: SkipGramConfig = SkipGramConfig()
                   ) -> EmbeddingTable:
    """Reference-mode SGD training: single-threaded, bit-deterministic per seed.

    Negatives are drawn from the unigram distribution raised to 0.75;
    negatives that collide with the positive context are dropped for that
    step.  The learning rate decays linearly over center positions with a
    floor at 1e-4 of the initial rate.  Returns input-side vectors; the
    unknown-token vector is the mean of all learned vectors.
    """
    v_size = len(corpus.vocab)
    if v_size < 2:
        raise DegenerateCorpusError("need a vocabulary of at least 2 tokens")
    index = {t: i for t, (i, _) in corpus.vocab.items()}
    sentences = [[index.get(t, -1) for t in s] for s in corpus.sentences]

    window = config.window
    total_centers = 0
    have_pair = False
    for s in sentences:
        for i, c in enumerate(s):
            if c < 0:
                continue
            total_centers += 1
            if not have_pair:
                lo, hi = max(0, i - window), min(len(s), i + window + 1)
                have_pair = any(s[j] >= 0 for j in range(lo, hi) if j != i)
    if not have_pair:
        raise DegenerateCorpusError("no (center, context) pair within the window")
    total_centers *= config.epochs

    rng = np.random.default_rng(config.seed)
    d = config.dim
    w_in = (rng.random((v_size, d)) - 0.5) / d
    w_out = np.zeros((v_size, d))

    # cumulative unigram^0.75 table for negative sampling
    probs = corpus.counts_by_index().astype(np.float64) ** 0.75
    cumulative = np.cumsum(probs / probs.sum())
    cumulative[-1] = 1.0

    lr0 = config.learning_rate
    lr_floor = lr0 * 1e-4
    done = 0
    k = config.negatives
    for _ in range(config.epochs):
        for s in sentences:
            n = len(s)
            for i, center in enumerate(s):
                if center < 0:
                    continue
                lr = max(lr_floor, lr0 * (1.0 - done / total_centers))
                done += 1
                lo, hi = max(0, i - window), min(n, i + window + 1)
                for j in range(lo, hi):
                    context = s[j]
                    if j == i or context < 0:
                        continue
                    v = w_in[center]
                    targets = [context]
                    labels = [1.0]
                    if k:
                        negs = np.searchsorted(cumulative, rng.random(k))
                        for t in negs:
                            if t != context:
                                targets.append(int(t))
                                labels.append(0.0)
                    u = w_out[targets]                        # (m, d)
                    g = (np.asarray(labels) - _sigmoid(u @ v)) * lr
                    v_update = g @ u
                    w_out[targets] += np.outer(g, v)
                    w_in[center] += v_update
    unk = w_in.mean(axis=0)
    return EmbeddingTable(w_in, unk, corpus.tokens_by_index(), config)


def assemble_features(graph: AlphaAst, table: EmbeddingTable) -> np.ndarray:
    """(n, d+3) feature matrix: mean token vector || one-hot annotation."""
    d = table.dim
    out = np.zeros((len(graph.nodes), d + 3))
    for row, node in enumerate(graph.nodes):
        tokens = node_tokens(node)
        acc = np.zeros(d)
        for t in tokens:
            acc += table.vector(t)
        out[row, :d] = acc / len(tokens)
        out[row, d:] = ANNOTATION_ONE_HOT[node.ann]
    return out
