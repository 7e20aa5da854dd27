"""Line-graph and graph-convolutional networks that emit per-node cut probabilities.

Both architectures end in a two-output linear head; the probability of
node ``v`` is the softmax weight of output 0. Training is unsupervised on
the relaxed cut ``1/4 (2p - 1)^T L (2p - 1)``.

LGNN layer (row-vector convention, ``h``: node features, ``g``: features of
the directed line graph)::

    ybar = [h, D h, A_1 h .. A_J h, S g, U g] @ Theta
    zbar = [g, D_L g, B_1 g .. B_J g, S^T h, U^T h] @ Phi
    h' = [relu(ybar), ybar],  g' = [relu(zbar), zbar]

The concatenation of the per-operator products against one stacked weight
matrix equals the sum of separate products ``op_k x W_k``. Each stacked
block maps to ``d/2`` columns so every layer outputs width ``d``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import grad as ag
from .errors import ConfigError, NumericalError
from .graphs import Graph, LineGraphView, cut_value, line_graph_view, power_adjacency
from .initialisation import DEFAULT_GNN_EPSILON, WarmStart, regularise

__all__ = [
    "GnnModel",
    "GraphOps",
    "TrainResult",
    "init_features",
    "graph_ops",
    "lgnn_forward",
    "gcn_forward",
    "forward",
    "predict",
    "gnn_loss",
    "train",
    "round_probabilities",
    "warmstart_from_gnn",
    "save_model",
    "load_model",
]

NORM_EPS = 1e-5


def init_features(g: Graph, view: LineGraphView | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Degree features: ``h0[v] = deg(v)``, ``g0[e] = out-degree of e under B``.

    Both are single-column matrices. A graph without edges has an empty
    line graph, so ``g0`` then has zero rows.
    """
    h0 = g.degrees.reshape(-1, 1).astype(float)
    if g.m == 0:
        return h0, np.zeros((0, 1))
    if view is None:
        view = line_graph_view(g)
    return h0, view.degrees.reshape(-1, 1).astype(float)


@dataclass
class GraphOps:
    """Constant operators for one graph, precomputed once and reused."""

    graph: Graph
    h0: np.ndarray
    g0: np.ndarray
    node_ops: tuple[np.ndarray, ...] = ()
    line_ops: tuple[np.ndarray, ...] = ()
    S: np.ndarray | None = None
    U: np.ndarray | None = None
    mean_adj: np.ndarray | None = None


def graph_ops(g: Graph, J: int = 3, arch: str = "lgnn") -> GraphOps:
    if arch == "gcn":
        deg = g.adjacency.astype(bool).sum(axis=1, keepdims=True)
        # isolated nodes: empty neighbourhood, mean defined as zero
        mean_adj = np.divide(
            (g.adjacency != 0).astype(float), deg, out=np.zeros((g.n, g.n)), where=deg > 0
        )
        return GraphOps(g, g.degrees.reshape(-1, 1).astype(float), np.zeros((0, 1)), mean_adj=mean_adj)
    if g.m == 0:
        raise ValueError("LGNN needs a graph with at least one edge")
    view = line_graph_view(g, J)
    h0, g0 = init_features(g, view)
    node_ops = (np.diag(g.degrees), *power_adjacency(g, J))
    line_ops = (np.diag(view.degrees), *view.B_powers)
    return GraphOps(g, h0, g0, node_ops, line_ops, view.S, view.U)


@dataclass
class GnnModel:
    """Layered LGNN/GCN parameters plus hyperparameters.

    ``norm="standardise"`` rescales each pre-activation column to zero mean
    and unit variance across the nodes of the current graph before the
    nonlinearity; ``norm="none"`` applies the raw update.

    ``noise > 0`` appends that many standard-normal columns to the degree
    features of every forward pass. On regular graphs degree features are
    identical for all nodes, so an equivariant network cannot split nodes
    that its operators do not tell apart; random columns break that tie.
    """

    arch: str = "lgnn"
    d: int = 16
    J: int = 3
    T_layers: int = 8
    norm: str = "standardise"
    noise: int = 0
    params: dict[str, ag.Tensor] = field(default_factory=dict)

    def __post_init__(self):
        if self.arch not in ("lgnn", "gcn"):
            raise ConfigError(f"unknown GNN architecture {self.arch!r}")
        if self.norm not in ("standardise", "none"):
            raise ConfigError(f"unknown normalisation {self.norm!r}")
        if self.d < 2 or self.d % 2:
            raise ConfigError(f"feature width d must be an even number >= 2, got {self.d}")
        if self.J < 1 or self.T_layers < 1:
            raise ConfigError("J and T_layers must be >= 1")
        if self.noise < 0:
            raise ConfigError(f"noise channel count must be >= 0, got {self.noise}")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        half = self.d // 2
        shapes: dict[str, tuple[int, ...]] = {}
        wh, wg = 1 + self.noise, 1
        for t in range(self.T_layers):
            if self.arch == "lgnn":
                # identity, D, A_1..A_J on own stream; S, U from the other
                shapes[f"theta{t}"] = ((self.J + 2) * wh + 2 * wg, half)
                shapes[f"phi{t}"] = ((self.J + 2) * wg + 2 * wh, half)
            else:
                shapes[f"theta0_{t}"] = (wh, self.d)
                shapes[f"theta1_{t}"] = (wh, self.d)
            wh = wg = self.d
        shapes["head_w"] = (wh, 2)
        shapes["head_b"] = (2,)
        return shapes

    @classmethod
    def create(
        cls,
        arch: str = "lgnn",
        d: int = 16,
        J: int = 3,
        T_layers: int = 8,
        seed: int = 0,
        norm: str = "standardise",
        noise: int = 0,
        zero: bool = False,
    ) -> "GnnModel":
        model = cls(arch=arch, d=d, J=J, T_layers=T_layers, norm=norm, noise=noise)
        rng = np.random.default_rng(seed)
        for name, shape in model.shapes().items():
            if zero or name == "head_b":
                data = np.zeros(shape)
            else:
                bound = math.sqrt(6.0 / (shape[0] + shape[1]))
                data = rng.uniform(-bound, bound, size=shape)
            model.params[name] = ag.parameter(data, name=name)
        return model

    def parameters(self) -> list[ag.Tensor]:
        return [self.params[k] for k in self.shapes()]

    def metadata(self) -> dict:
        return {"arch": self.arch, "d": self.d, "J": self.J, "T_layers": self.T_layers, "norm": self.norm,
                "noise": self.noise}


def _normalise(x: ag.Tensor, mode: str) -> ag.Tensor:
    if mode == "none" or x.shape[0] < 2:
        return x
    mu = ag.mean(x, axis=0, keepdims=True)
    centred = x - mu
    var = ag.mean(ag.square(centred), axis=0, keepdims=True)
    return centred * ag.exp(ag.scale(ag.log(var + NORM_EPS), -0.5))


def _head(model: GnnModel, h: ag.Tensor) -> ag.Tensor:
    logits = h @ model.params["head_w"] + model.params["head_b"]
    return ag.softmax_rows(logits)[:, 0]


def _input_features(model: GnnModel, ops: GraphOps, noise) -> ag.Tensor:
    if model.noise == 0:
        return ag.Tensor(ops.h0)
    if noise is None or isinstance(noise, (int, np.random.Generator)):
        rng = np.random.default_rng(0 if noise is None else noise)
        noise = rng.standard_normal((ops.h0.shape[0], model.noise))
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (ops.h0.shape[0], model.noise):
        raise ValueError(f"noise must have shape {(ops.h0.shape[0], model.noise)}, got {noise.shape}")
    return ag.Tensor(np.hstack([ops.h0, noise]))


def lgnn_forward(model: GnnModel, ops: GraphOps, noise=None) -> ag.Tensor:
    """Node probabilities (length-``n`` tensor) from the LGNN.

    ``noise`` (only used when ``model.noise > 0``) is an explicit
    ``(n, model.noise)`` array, a seed, or a ``Generator``; ``None`` means seed 0.
    """
    if model.arch != "lgnn":
        raise ConfigError("lgnn_forward needs an LGNN model")
    h = _input_features(model, ops, noise)
    gl = ag.Tensor(ops.g0)
    S, U = ops.S, ops.U
    St, Ut = S.T, U.T
    for t in range(model.T_layers):
        node_in = ag.concat([h, *[op @ h for op in ops.node_ops], S @ gl, U @ gl], axis=1)
        line_in = ag.concat([gl, *[op @ gl for op in ops.line_ops], St @ h, Ut @ h], axis=1)
        ybar = _normalise(node_in @ model.params[f"theta{t}"], model.norm)
        zbar = _normalise(line_in @ model.params[f"phi{t}"], model.norm)
        h = ag.concat([ag.relu(ybar), ybar], axis=1)
        gl = ag.concat([ag.relu(zbar), zbar], axis=1)
    return _head(model, h)


def gcn_forward(model: GnnModel, ops: GraphOps, noise=None) -> ag.Tensor:
    """``h' = relu(mean_{nbrs} h  Theta0 + h Theta1)`` per layer, then the head."""
    if model.arch != "gcn":
        raise ConfigError("gcn_forward needs a GCN model")
    h = _input_features(model, ops, noise)
    for t in range(model.T_layers):
        pre = (ops.mean_adj @ h) @ model.params[f"theta0_{t}"] + h @ model.params[f"theta1_{t}"]
        h = ag.relu(_normalise(pre, model.norm))
    return _head(model, h)


def forward(model: GnnModel, g: Graph | GraphOps, noise=None) -> ag.Tensor:
    ops = g if isinstance(g, GraphOps) else graph_ops(g, model.J, model.arch)
    if model.arch == "lgnn":
        return lgnn_forward(model, ops, noise)
    return gcn_forward(model, ops, noise)


def predict(model: GnnModel, g: Graph | GraphOps, noise=None) -> np.ndarray:
    with ag.no_grad():
        return forward(model, g, noise).data.copy()


def gnn_loss(p: ag.Tensor | np.ndarray, g: Graph) -> ag.Tensor:
    """Negated relaxed cut ``-1/4 (2p - 1)^T L (2p - 1)`` (to be minimised)."""
    p = p if isinstance(p, ag.Tensor) else ag.Tensor(p)
    v = ag.scale(p, 2.0) - 1.0
    lv = ag.matmul(g.laplacian, v)
    return ag.scale(ag.sum_(v * lv), -0.25)


@dataclass
class TrainResult:
    model: GnnModel
    loss_trace: list[float]
    seconds: float


def train(
    model: GnnModel,
    training_graphs: Sequence[Graph],
    epochs: int = 100,
    lr: float = 1e-3,
    seed: int = 0,
    batch_size: int = 1,
    log_every: int = 0,
) -> TrainResult:
    """Unsupervised Adam training; one update per graph (``batch_size=1``).

    Graph order is reshuffled every epoch from ``seed``. With ``batch_size > 1``
    the update uses the mean loss over that many consecutive graphs.
    """
    if not training_graphs:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(seed)
    ops = [graph_ops(g, model.J, model.arch) for g in training_graphs]
    opt = ag.Adam(model.parameters(), lr=lr)
    trace: list[float] = []
    t0 = time.perf_counter()
    for epoch in range(epochs):
        order = rng.permutation(len(ops))
        total = 0.0
        for start in range(0, len(order), batch_size):
            chunk = order[start : start + batch_size]
            opt.zero_grad()
            losses = [gnn_loss(forward(model, ops[k], rng), ops[k].graph) for k in chunk]
            loss = losses[0] if len(losses) == 1 else ag.scale(ag.sum_(ag.stack(losses)), 1.0 / len(losses))
            val = loss.item()
            if not np.isfinite(val):
                raise NumericalError(f"GNN loss became {val} at epoch {epoch}")
            ag.backward(loss)
            opt.step()
            total += val * len(chunk)
        trace.append(total / len(ops))
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}: loss {trace[-1]:.4f}")
    return TrainResult(model, trace, time.perf_counter() - t0)


def round_probabilities(p: Sequence[float], g: Graph | None = None) -> tuple[np.ndarray, float | None]:
    """Threshold at 0.5 (ties go to 1). Returns bits and, if ``g`` given, the cut."""
    p = np.asarray(getattr(p, "data", p), dtype=float)
    bits = (p >= 0.5).astype(np.int64)
    if g is None:
        return bits, None
    return bits, cut_value(g, 2 * bits - 1)


def warmstart_from_gnn(model: GnnModel, g: Graph, epsilon: float = DEFAULT_GNN_EPSILON, noise=None) -> WarmStart:
    """Soft probabilities as ``x*``, clamped to ``[eps, 1 - eps]``."""
    return regularise(predict(model, g, noise), epsilon, source="gnn")


def save_model(model: GnnModel, path: str | Path) -> None:
    ag.save_tensors(path, model.params, meta={"kind": "gnn", **model.metadata()})


def load_model(path: str | Path) -> GnnModel:
    arrays, meta = ag.load_tensors(path)
    if meta.get("kind") != "gnn":
        raise ConfigError(f"{path}: not a GNN checkpoint")
    model = GnnModel(
        arch=meta["arch"], d=meta["d"], J=meta["J"], T_layers=meta["T_layers"],
        norm=meta["norm"], noise=meta.get("noise", 0),
    )
    expected = model.shapes()
    if set(arrays) != set(expected):
        raise ConfigError(f"{path}: parameter names do not match architecture")
    for k, shape in expected.items():
        if tuple(arrays[k].shape) != shape:
            raise ConfigError(f"{path}: {k} has shape {arrays[k].shape}, expected {shape}")
        model.params[k] = ag.parameter(arrays[k], name=k)
    return model
