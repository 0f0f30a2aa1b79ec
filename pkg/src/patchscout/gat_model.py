"""Graph attention network with exact analytic gradients, in plain numpy.

Per layer, node features h are linearly transformed (z_i = W h_i), pairwise
scores E_ij = LeakyReLU(a . [z_i || z_j]) are softmax-normalized over each
node's neighborhood (self-connection included) into attention coefficients,
and the next layer is h'_i = act(sum_j alpha_ij z_j) with ReLU on hidden
layers and identity on the last one.  Mean pooling over nodes gives the
graph vector, which a one-hidden-layer MLP maps to a fixing probability.

Everything is float64; softmax uses max-subtraction; the backward pass is
hand-derived and validated against central finite differences in the tests.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import (
    BadConfigError,
    EmptyBatchError,
    EmptyGraphError,
    ShapeMismatchError,
    VersionMismatchError,
)

LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class GatConfig:
    d_in: int                  # embedding dim + 3 annotation slots
    layers: int = 2
    d_hidden: int = 64
    mlp_hidden: int = 64
    seed: int = 42

    def validate(self) -> None:
        if min(self.d_in, self.layers, self.d_hidden, self.mlp_hidden) < 1:
            raise BadConfigError(f"all dimensions must be positive: {self}")


@dataclass
class GatLayerParams:
    W: np.ndarray              # (d_out, d_in) feature transformation
    a: np.ndarray              # (2 * d_out,) attention vector


@dataclass
class MlpParams:
    W1: np.ndarray             # (hidden, d_graph)
    b1: np.ndarray             # (hidden,)
    w2: np.ndarray             # (hidden,)
    b2: np.ndarray             # (1,)


@dataclass
class GatModel:
    layers: list[GatLayerParams]
    mlp: MlpParams
    config: GatConfig

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """(name, tensor) pairs in declaration order; tensors are live views."""
        out: list[tuple[str, np.ndarray]] = []
        for i, layer in enumerate(self.layers):
            out.append((f"layer{i}.W", layer.W))
            out.append((f"layer{i}.a", layer.a))
        out.append(("mlp.W1", self.mlp.W1))
        out.append(("mlp.b1", self.mlp.b1))
        out.append(("mlp.w2", self.mlp.w2))
        out.append(("mlp.b2", self.mlp.b2))
        return out


@dataclass
class GraphInput:
    """One graph ready for the model: features plus neighbor pairs.

    ``row[k]`` aggregates from ``col[k]``; the pair list is symmetric,
    includes every self-loop, is deduplicated, and is sorted by (row, col).
    """

    features: np.ndarray       # (n, d_in)
    row: np.ndarray            # (E,) int64
    col: np.ndarray            # (E,) int64
    label: int | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]


def graph_input(features: np.ndarray, edges: list[tuple[int, int]] | list,
                label: int | None = None) -> GraphInput:
    """Build the symmetrized, self-looped neighbor list from directed edges."""
    n = features.shape[0]
    if n == 0:
        raise EmptyGraphError("graph has no nodes")
    pairs = {(i, i) for i in range(n)}
    for e in edges:
        src, dst = e[0], e[1]
        pairs.add((src, dst))
        pairs.add((dst, src))
    ordered = sorted(pairs)
    row = np.fromiter((p[0] for p in ordered), dtype=np.int64, count=len(ordered))
    col = np.fromiter((p[1] for p in ordered), dtype=np.int64, count=len(ordered))
    return GraphInput(np.asarray(features, dtype=np.float64), row, col, label)


def from_alpha(alpha_graph, features: np.ndarray, label: int | None = None) -> GraphInput:
    return graph_input(features, [(s, d) for s, d, _ in alpha_graph.edges], label)


# --- initialization ------------------------------------------------------------------


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int,
            shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_model(config: GatConfig) -> GatModel:
    """Glorot-uniform weights, zero biases; deterministic per config.seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    layers: list[GatLayerParams] = []
    d_in = config.d_in
    for _ in range(config.layers):
        W = _glorot(rng, d_in, config.d_hidden, (config.d_hidden, d_in))
        a = _glorot(rng, 2 * config.d_hidden, 1, (2 * config.d_hidden,))
        layers.append(GatLayerParams(W, a))
        d_in = config.d_hidden
    W1 = _glorot(rng, config.d_hidden, config.mlp_hidden,
                 (config.mlp_hidden, config.d_hidden))
    b1 = np.zeros(config.mlp_hidden)
    w2 = _glorot(rng, config.mlp_hidden, 1, (config.mlp_hidden,))
    mlp = MlpParams(W1, b1, w2, np.zeros(1))
    return GatModel(layers, mlp, config)


# --- forward -----------------------------------------------------------------------


def _segment_sum(values: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n,) + values.shape[1:])
    np.add.at(out, index, values)
    return out


def _leaky_relu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def _leaky_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, LEAKY_SLOPE)


def attention_weights(layer: GatLayerParams, h: np.ndarray,
                      row: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Attention coefficient per (row, col) pair; rows sum to one."""
    alpha, _ = _attention_forward(layer, h, row, col)
    return alpha


def _attention_forward(layer: GatLayerParams, h: np.ndarray,
                       row: np.ndarray, col: np.ndarray):
    n, d_in = h.shape
    d_out = layer.W.shape[0]
    if layer.W.shape[1] != d_in:
        raise ShapeMismatchError(
            f"W expects d_in={layer.W.shape[1]}, features have {d_in}")
    if layer.a.shape != (2 * d_out,):
        raise ShapeMismatchError(
            f"a has shape {layer.a.shape}, expected ({2 * d_out},)")
    z = h @ layer.W.T                                   # (n, d_out)
    a_src, a_dst = layer.a[:d_out], layer.a[d_out:]
    s = z @ a_src                                       # score of i-as-self
    t = z @ a_dst                                       # score of j-as-neighbor
    pre = s[row] + t[col]
    e = _leaky_relu(pre)
    # softmax per row with max-subtraction
    row_max = np.full(n, -np.inf)
    np.maximum.at(row_max, row, e)
    shifted = np.exp(e - row_max[row])
    denom = _segment_sum(shifted, row, n)
    alpha = shifted / denom[row]
    cache = (z, s, t, pre, alpha)
    return alpha, cache


def gat_layer_forward(layer: GatLayerParams, h: np.ndarray, row: np.ndarray,
                      col: np.ndarray, final: bool = False) -> np.ndarray:
    """One message-passing step: h'_i = act(sum_j alpha_ij z_j)."""
    alpha, cache = _attention_forward(layer, h, row, col)
    z = cache[0]
    msg = _segment_sum(alpha[:, None] * z[col], row, h.shape[0])
    return msg if final else np.maximum(msg, 0.0)


def readout(h_final: np.ndarray) -> np.ndarray:
    """Graph vector: arithmetic mean over node features of the last layer."""
    if h_final.shape[0] == 0:
        raise EmptyGraphError("cannot pool an empty graph")
    return h_final.mean(axis=0)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return float(1.0 / (1.0 + np.exp(-x)))
    ex = np.exp(x)
    return float(ex / (1.0 + ex))


def _forward(model: GatModel, graph: GraphInput):
    """Full forward pass with caches for the backward pass."""
    if graph.features.shape[1] != model.config.d_in:
        raise ShapeMismatchError(
            f"graph features have dim {graph.features.shape[1]}, "
            f"model expects {model.config.d_in}")
    h = graph.features
    layer_caches = []
    last = len(model.layers) - 1
    for li, layer in enumerate(model.layers):
        alpha, (z, s, t, pre, alpha_full) = _attention_forward(
            layer, h, graph.row, graph.col)
        msg = _segment_sum(alpha[:, None] * z[graph.col], graph.row, h.shape[0])
        out = msg if li == last else np.maximum(msg, 0.0)
        layer_caches.append((h, z, pre, alpha, msg))
        h = out
    pooled = readout(h)
    u_pre = model.mlp.W1 @ pooled + model.mlp.b1
    u = np.maximum(u_pre, 0.0)
    logit = float(model.mlp.w2 @ u + model.mlp.b2[0])
    return logit, (layer_caches, h, pooled, u_pre, u)


def predict(model: GatModel, graph: GraphInput) -> float:
    """Fixing probability for one graph."""
    logit, _ = _forward(model, graph)
    return _sigmoid(logit)


# --- loss and gradients ---------------------------------------------------------------


def zero_gradients(model: GatModel) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    for i, layer in enumerate(model.layers):
        grads[f"layer{i}.W"] = np.zeros_like(layer.W)
        grads[f"layer{i}.a"] = np.zeros_like(layer.a)
    grads["mlp.W1"] = np.zeros_like(model.mlp.W1)
    grads["mlp.b1"] = np.zeros_like(model.mlp.b1)
    grads["mlp.w2"] = np.zeros_like(model.mlp.w2)
    grads["mlp.b2"] = np.zeros(1)
    return grads


def _backward(model: GatModel, graph: GraphInput, caches, d_logit: float,
              grads: dict[str, np.ndarray]) -> None:
    layer_caches, h_final, pooled, u_pre, u = caches
    mlp = model.mlp
    grads["mlp.b2"][0] += d_logit
    grads["mlp.w2"] += d_logit * u
    g_u = d_logit * mlp.w2
    g_u_pre = g_u * (u_pre > 0)
    grads["mlp.W1"] += np.outer(g_u_pre, pooled)
    grads["mlp.b1"] += g_u_pre
    g_pooled = mlp.W1.T @ g_u_pre
    n = graph.n
    g_h = np.tile(g_pooled / n, (n, 1))                 # mean-pool backward

    row, col = graph.row, graph.col
    last = len(model.layers) - 1
    for li in range(last, -1, -1):
        layer = model.layers[li]
        h_in, z, pre, alpha, msg = layer_caches[li]
        d_out = z.shape[1]
        g_msg = g_h if li == last else g_h * (msg > 0)
        # message sum: msg_i = sum_j alpha_ij z_j
        g_alpha = np.einsum("ed,ed->e", g_msg[row], z[col])
        g_z = _segment_sum(alpha[:, None] * g_msg[row], col, n)
        # softmax rows: g_e = alpha * (g_alpha - sum_k alpha_k g_alpha_k)
        dot = _segment_sum(alpha * g_alpha, row, n)
        g_e = alpha * (g_alpha - dot[row])
        g_pre = g_e * _leaky_grad(pre)
        g_s = _segment_sum(g_pre, row, n)
        g_t = _segment_sum(g_pre, col, n)
        a_src, a_dst = layer.a[:d_out], layer.a[d_out:]
        grads[f"layer{li}.a"][:d_out] += z.T @ g_s
        grads[f"layer{li}.a"][d_out:] += z.T @ g_t
        g_z += np.outer(g_s, a_src) + np.outer(g_t, a_dst)
        grads[f"layer{li}.W"] += g_z.T @ h_in
        g_h = g_z @ layer.W


def sample_loss(logit: float, label: int, pos_weight: float) -> float:
    """Weighted binary cross-entropy from the logit, numerically stable."""
    weight = pos_weight if label == 1 else 1.0
    return weight * float(np.logaddexp(0.0, logit) - label * logit)


def loss_and_gradients(model: GatModel, batch: list[GraphInput],
                       pos_weight: float = 1.0
                       ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean weighted BCE over the batch plus exact gradients for every tensor.

    Accumulation runs in ascending sample order so results are bit-stable.
    """
    if not batch:
        raise EmptyBatchError("batch is empty")
    grads = zero_gradients(model)
    total = 0.0
    for graph in batch:
        if graph.label is None:
            raise EmptyBatchError("batch graph is missing its label")
        logit, caches = _forward(model, graph)
        weight = pos_weight if graph.label == 1 else 1.0
        total += sample_loss(logit, graph.label, pos_weight)
        d_logit = weight * (_sigmoid(logit) - graph.label)
        _backward(model, graph, caches, d_logit, grads)
    b = len(batch)
    for g in grads.values():
        g /= b
    return total / b, grads


# --- checkpoint io -----------------------------------------------------------------------

MAGIC = b"PSGAT1\n"


def save_model(model: GatModel, path: str, epoch: int = 0,
               metrics: dict | None = None) -> None:
    """Checkpoint: magic, JSON header, tensors in declaration order (<f8)."""
    header = json.dumps({
        "config": asdict(model.config),
        "seed": model.config.seed,
        "epoch": epoch,
        "metrics": metrics or {},
    }, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for layer in model.layers:
            fh.write(layer.W.astype("<f8").tobytes(order="C"))
            fh.write(layer.a.astype("<f8").tobytes(order="C"))
        fh.write(model.mlp.W1.astype("<f8").tobytes(order="C"))
        fh.write(model.mlp.b1.astype("<f8").tobytes(order="C"))
        fh.write(model.mlp.w2.astype("<f8").tobytes(order="C"))
        fh.write(model.mlp.b2.astype("<f8").tobytes(order="C"))


def load_model(path: str) -> tuple[GatModel, dict]:
    """Returns (model, header). Raises VersionMismatchError on wrong magic."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise VersionMismatchError(f"{path}: not a model checkpoint (magic {magic!r})")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        config = GatConfig(**header["config"])
        layers = []
        d_in = config.d_in
        for _ in range(config.layers):
            W = np.frombuffer(fh.read(config.d_hidden * d_in * 8),
                              dtype="<f8").reshape(config.d_hidden, d_in).copy()
            a = np.frombuffer(fh.read(2 * config.d_hidden * 8), dtype="<f8").copy()
            layers.append(GatLayerParams(W, a))
            d_in = config.d_hidden
        W1 = np.frombuffer(fh.read(config.mlp_hidden * config.d_hidden * 8),
                           dtype="<f8").reshape(config.mlp_hidden, config.d_hidden).copy()
        b1 = np.frombuffer(fh.read(config.mlp_hidden * 8), dtype="<f8").copy()
        w2 = np.frombuffer(fh.read(config.mlp_hidden * 8), dtype="<f8").copy()
        b2 = np.frombuffer(fh.read(8), dtype="<f8").copy()
    return GatModel(layers, MlpParams(W1, b1, w2, b2), config), header
