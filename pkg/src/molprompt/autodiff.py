"""Minimal reverse-mode automatic differentiation on numpy float64 arrays.

Covers exactly the operations this package trains with: embedding lookups,
affine maps, rectifier, softmax, gathers/slices, reductions, and the hinge /
smooth-L1 / cross-entropy loss primitives. Everything runs in 64-bit floats;
determinism is preferred over speed.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A node in the computation tape."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self) -> "Tensor":
        out = _node(self.value.T, (self,))

        def backward(g):
            _accumulate(self, g.T)

        out._backward = backward
        return out

    def item(self) -> float:
        return float(self.value)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, grad={self.grad is not None})"

    # operator sugar; constants stay plain arrays wrapped on the fly
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return mul(self, 1.0 / float(scalar))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def ensure_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents) -> Tensor:
    out = Tensor(value)
    tracked = tuple(p for p in parents if p.requires_grad or p._parents)
    out._parents = tracked
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if not (t.requires_grad or t._parents):
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)
    out = _node(a.value + b.value, (a, b))

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.value.shape))
        _accumulate(b, _unbroadcast(g, b.value.shape))

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)
    out = _node(a.value * b.value, (a, b))

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.value, a.value.shape))
        _accumulate(b, _unbroadcast(g * a.value, b.value.shape))

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)
    out = _node(a.value @ b.value, (a, b))

    def backward(g):
        _accumulate(a, g @ b.value.T)
        _accumulate(b, a.value.T @ g)

    out._backward = backward
    return out


def relu(x: Tensor) -> Tensor:
    x = ensure_tensor(x)
    mask = x.value > 0
    out = _node(np.where(mask, x.value, 0.0), (x,))

    def backward(g):
        _accumulate(x, g * mask)

    out._backward = backward
    return out


def square(x: Tensor) -> Tensor:
    x = ensure_tensor(x)
    out = _node(x.value * x.value, (x,))

    def backward(g):
        _accumulate(x, 2.0 * g * x.value)

    out._backward = backward
    return out


def sqrt(x: Tensor, eps: float = 0.0) -> Tensor:
    """Square root. Pass ``eps`` to keep the gradient finite near zero."""
    x = ensure_tensor(x)
    root = np.sqrt(x.value + eps)
    out = _node(root, (x,))

    def backward(g):
        _accumulate(x, g * 0.5 / root)

    out._backward = backward
    return out


def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = ensure_tensor(x)
    out = _node(x.value.sum(axis=axis, keepdims=keepdims), (x,))

    def backward(g):
        if axis is None:
            _accumulate(x, np.broadcast_to(g, x.value.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accumulate(x, np.broadcast_to(gg, x.value.shape).copy())

    out._backward = backward
    return out


def mean_all(x: Tensor) -> Tensor:
    x = ensure_tensor(x)
    return tensor_sum(x) / x.value.size


def _segment_layout(starts, sizes, total_rows: int):
    starts = np.asarray(starts, dtype=np.intp)
    sizes = np.asarray(sizes, dtype=np.intp)
    if len(starts) == 0 or starts[0] != 0 or sizes.sum() != total_rows:
        raise ValueError("segments must tile the rows contiguously")
    return starts, sizes


def segment_softmax(x: Tensor, starts, sizes) -> Tensor:
    """Column-wise softmax within contiguous row segments."""
    x = ensure_tensor(x)
    starts, sizes = _segment_layout(starts, sizes, x.value.shape[0])
    seg_max = np.maximum.reduceat(x.value, starts, axis=0)
    ex = np.exp(x.value - np.repeat(seg_max, sizes, axis=0))
    denom = np.add.reduceat(ex, starts, axis=0)
    p = ex / np.repeat(denom, sizes, axis=0)
    out = _node(p, (x,))

    def backward(g):
        dot = np.add.reduceat(g * p, starts, axis=0)
        _accumulate(x, p * (g - np.repeat(dot, sizes, axis=0)))

    out._backward = backward
    return out


def segment_sum(x: Tensor, starts, sizes) -> Tensor:
    """Row sums over contiguous segments: (N, D) -> (num_segments, D)."""
    x = ensure_tensor(x)
    starts, sizes = _segment_layout(starts, sizes, x.value.shape[0])
    out = _node(np.add.reduceat(x.value, starts, axis=0), (x,))

    def backward(g):
        _accumulate(x, np.repeat(g, sizes, axis=0))

    out._backward = backward
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = ensure_tensor(x)
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    p = ex / ex.sum(axis=axis, keepdims=True)
    out = _node(p, (x,))

    def backward(g):
        dot = (g * p).sum(axis=axis, keepdims=True)
        _accumulate(x, p * (g - dot))

    out._backward = backward
    return out


def layer_norm_rows(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Normalize each row to zero mean and unit variance (no learned affine)."""
    x = ensure_tensor(x)
    mu = x.value.mean(axis=1, keepdims=True)
    var = x.value.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (x.value - mu) * inv
    out = _node(y, (x,))

    def backward(g):
        g_mean = g.mean(axis=1, keepdims=True)
        gy_mean = (g * y).mean(axis=1, keepdims=True)
        _accumulate(x, inv * (g - g_mean - y * gy_mean))

    out._backward = backward
    return out


def gather_rows(x: Tensor, indices) -> Tensor:
    x = ensure_tensor(x)
    idx = np.asarray(indices, dtype=np.intp)
    out = _node(x.value[idx], (x,))

    def backward(g):
        if x.requires_grad or x._parents:
            acc = np.zeros_like(x.value)
            np.add.at(acc, idx, g)
            _accumulate(x, acc)

    out._backward = backward
    return out


def scatter_add_rows(x: Tensor, indices, num_rows: int) -> Tensor:
    """Sum rows of ``x`` into ``num_rows`` buckets given by ``indices``."""
    x = ensure_tensor(x)
    idx = np.asarray(indices, dtype=np.intp)
    acc = np.zeros((num_rows,) + x.value.shape[1:], dtype=np.float64)
    np.add.at(acc, idx, x.value)
    out = _node(acc, (x,))

    def backward(g):
        _accumulate(x, g[idx])

    out._backward = backward
    return out


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    x = ensure_tensor(x)
    out = _node(x.value[start:stop], (x,))

    def backward(g):
        if x.requires_grad or x._parents:
            acc = np.zeros_like(x.value)
            acc[start:stop] = g
            _accumulate(x, acc)

    out._backward = backward
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [ensure_tensor(t) for t in tensors]
    out = _node(np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(sl)])

    out._backward = backward
    return out


def smooth_l1(pred: Tensor, target, beta: float = 1.0) -> Tensor:
    """Elementwise smooth-L1 (Huber) with threshold ``beta``."""
    pred = ensure_tensor(pred)
    target = ensure_tensor(target)
    diff = pred.value - target.value
    absd = np.abs(diff)
    val = np.where(absd < beta, 0.5 * diff * diff / beta, absd - 0.5 * beta)
    out = _node(val, (pred, target))

    def backward(g):
        d = np.clip(diff / beta, -1.0, 1.0)
        _accumulate(pred, g * d)
        _accumulate(target, -g * d)

    out._backward = backward
    return out


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Elementwise binary cross-entropy on logits, numerically stable."""
    logits = ensure_tensor(logits)
    t = np.asarray(targets, dtype=np.float64)
    z = logits.value
    val = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    out = _node(val, (logits,))

    def backward(g):
        sig = 1.0 / (1.0 + np.exp(-z))
        _accumulate(logits, g * (sig - t))

    out._backward = backward
    return out


def backward(loss: Tensor):
    """Reverse-mode sweep from a scalar loss; accumulates into ``.grad``."""
    if loss.value.size != 1:
        raise ValueError("backward expects a scalar loss")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


class Adam:
    """Adaptive-moment gradient descent over a dict of parameter tensors."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(p.value) for k, p in self.params.items()}
        self._v = {k: np.zeros_like(p.value) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        for key, p in self.params.items():
            if p.grad is None:
                continue
            m = self._m[key]
            v = self._v[key]
            m *= self.beta1
            m += (1 - self.beta1) * p.grad
            v *= self.beta2
            v += (1 - self.beta2) * p.grad * p.grad
            mhat = m / (1 - self.beta1**self.t)
            vhat = v / (1 - self.beta2**self.t)
            p.value -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
