"""Minimal define-by-run reverse-mode autodiff over float64 numpy arrays.

Every op builds a node holding its parents and a closure returning the
vector-Jacobian products. ``backward`` walks the graph once in reverse
topological order and then frees it; calling it twice on the same loss
raises :class:`~gnnqaoa.errors.BackwardError`. Tensors created with
``requires_grad=False`` (or via :meth:`Tensor.detach`) are constants and
never receive gradients.

Broadcasting follows numpy; gradients are summed back to operand shapes.
"""

from __future__ import annotations

import contextlib
import json
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import BackwardError, NumericalError, ShapeError

__all__ = [
    "Tensor",
    "tensor",
    "parameter",
    "no_grad",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "square",
    "softmax_rows",
    "log_softmax_rows",
    "concat",
    "stack",
    "mean",
    "sum_",
    "minimum",
    "clip",
    "custom",
    "backward",
    "Adam",
    "clip_grad_norm",
    "save_tensors",
    "load_tensors",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1
_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Record no backward graph inside the block (inference only)."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "op", "_consumed", "name")
    # make ndarray @ Tensor dispatch to Tensor.__rmatmul__
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=float)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable | None = None
        self.op = "leaf"
        self._consumed = False
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        tag = f", op={self.op}" if self.op != "leaf" else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, _reciprocal(other))
        return scale(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return index(self, idx)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=float), requires_grad=True, name=name)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], vjp: Callable, op: str) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
        out.op = op
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# -- binary ops --------------------------------------------------------------
def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    ad, bd = a.data, b.data

    def vjp(g):
        if bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return g @ bd.T, ad.T @ g

    return _node(ad @ bd, (a, b), vjp, "matmul")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape
    return _node(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def mul(a, b) -> Tensor:
    """Elementwise product."""
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data
    return _node(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
        "mul",
    )


def minimum(a, b) -> Tensor:
    """Elementwise minimum; ties send the gradient to ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("minimum", a, b)
    ad, bd = a.data, b.data
    pick_a = ad <= bd

    def vjp(g):
        return _unbroadcast(g * pick_a, ad.shape), _unbroadcast(g * ~pick_a, bd.shape)

    return _node(np.minimum(ad, bd), (a, b), vjp, "minimum")


# -- unary ops ---------------------------------------------------------------
def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return _node(a.data * c, (a,), lambda g: (g * c,), "scale")


def neg(a) -> Tensor:
    return scale(a, -1.0)


def _reciprocal(a: Tensor) -> Tensor:
    r = 1.0 / a.data
    return _node(r, (a,), lambda g: (-g * r * r,), "reciprocal")


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _node(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.data)
    return _node(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def exp(a) -> Tensor:
    a = _as_tensor(a)
    e = np.exp(a.data)
    return _node(e, (a,), lambda g: (g * e,), "exp")


def log(a) -> Tensor:
    a = _as_tensor(a)
    d = a.data
    return _node(np.log(d), (a,), lambda g: (g / d,), "log")


def square(a) -> Tensor:
    a = _as_tensor(a)
    d = a.data
    return _node(d * d, (a,), lambda g: (2.0 * g * d,), "square")


def clip(a, lo: float, hi: float) -> Tensor:
    a = _as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _node(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clip")


def softmax_rows(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError("softmax_rows", a.shape)
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (s * (g - np.sum(g * s, axis=1, keepdims=True)),)

    return _node(s, (a,), vjp, "softmax_rows")


def log_softmax_rows(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError("log_softmax_rows", a.shape)
    z = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    s = np.exp(out)
    return _node(out, (a,), lambda g: (g - s * g.sum(axis=1, keepdims=True),), "log_softmax_rows")


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    return _node(a.data.T, (a,), lambda g: (g.T,), "transpose")


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def index(a, idx) -> Tensor:
    a = _as_tensor(a)
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _node(a.data[idx], (a,), vjp, "index")


# -- reductions / structure --------------------------------------------------
def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), vjp, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat")
    ax = axis % ts[0].ndim
    for t in ts[1:]:
        if t.ndim != ts[0].ndim or any(
            t.shape[k] != ts[0].shape[k] for k in range(t.ndim) if k != ax
        ):
            raise ShapeError("concat", ts[0].shape, t.shape)
    splits = np.cumsum([t.shape[ax] for t in ts])[:-1]
    return _node(
        np.concatenate([t.data for t in ts], axis=ax),
        ts,
        lambda g: tuple(np.split(g, splits, axis=ax)),
        "concat",
    )


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    shapes = {t.shape for t in ts}
    if len(shapes) != 1:
        raise ShapeError("stack", *sorted(shapes))
    n = len(ts)
    return _node(
        np.stack([t.data for t in ts], axis=axis),
        ts,
        lambda g: tuple(np.take(g, k, axis=axis) for k in range(n)),
        "stack",
    )


def custom(inputs: Sequence, forward: np.ndarray, vjp: Callable, op: str = "custom") -> Tensor:
    """Wrap an externally differentiated function.

    ``forward`` is the already computed output; ``vjp(g)`` must return one
    gradient array per input.
    """
    ts = [_as_tensor(t) for t in inputs]
    return _node(np.asarray(forward, dtype=float), ts, vjp, op)


# -- reverse pass ------------------------------------------------------------
def _topo(root: Tensor) -> list[Tensor]:
    order, seen, stack_ = [], set(), [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack_.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate ``d loss / d leaf`` into ``leaf.grad`` for all reachable leaves."""
    if loss.size != 1:
        raise BackwardError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise BackwardError("backward already ran on this graph; rebuild it (and reset grads) first")
    if not loss.requires_grad:
        loss._consumed = True
        return
    order = _topo(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if not parent.requires_grad or pg is None:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    for node in order:
        node._parents = ()
        node._vjp = None
    loss._consumed = True


# -- training utilities --------------------------------------------------------
def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> tuple[float, bool]:
    """Rescale gradients in place to global norm ``max_norm``. Returns (norm, clipped)."""
    params = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(p.grad ** 2)) for p in params)))
    if not np.isfinite(total):
        raise NumericalError("non-finite gradient norm")
    if total > max_norm:
        for p in params:
            p.grad = p.grad * (max_norm / total)
        return total, True
    return total, False


class Adam:
    """Adam with bias correction; updates ``Tensor.data`` in place."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -- persistence -----------------------------------------------------------------
def save_tensors(path: str | Path, tensors: Mapping[str, Tensor | np.ndarray], meta: Mapping | None = None) -> None:
    """Versioned ``.npz`` dump: one array per name plus a JSON header."""
    header = {"format": "gnnqaoa-tensors", "version": CHECKPOINT_VERSION, "meta": dict(meta or {})}
    header["shapes"] = {k: list(np.shape(getattr(v, "data", v))) for k, v in tensors.items()}
    arrays = {f"t/{k}": np.asarray(getattr(v, "data", v), dtype=float) for k, v in tensors.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as z:
        if "__header__" not in z.files:
            raise ValueError(f"{path}: not a tensor checkpoint")
        header = json.loads(str(z["__header__"]))
        if header.get("format") != "gnnqaoa-tensors":
            raise ValueError(f"{path}: unknown checkpoint format")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        arrays = {k[2:]: z[k] for k in z.files if k.startswith("t/")}
    for k, shape in header["shapes"].items():
        if list(arrays[k].shape) != shape:
            raise ValueError(f"{path}: tensor {k} has shape {arrays[k].shape}, header says {shape}")
    return arrays, header["meta"]
