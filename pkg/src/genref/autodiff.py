"""Minimal reverse-mode automatic differentiation over numpy arrays.

Small tape-based engine in the micrograd style: a Tensor wraps a
float64 ndarray, ops build a graph of parents with VJP closures, and
``backward`` walks the graph in reverse topological order. Everything
runs in float64 so analytic gradients can be held to tight
finite-difference tolerances.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tensor",
    "tensor",
    "gelu",
    "sigmoid",
    "relu",
    "exp",
    "log",
    "absval",
    "minimum",
    "maximum",
    "softmax",
    "gather_rows",
    "upsample_nearest",
    "bce_with_logits",
    "softmax_cross_entropy",
    "finite_difference_check",
]

_GELU_K = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjps")

    def __init__(self, data, requires_grad: bool = False, parents=(), vjps=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._vjps = vjps  # one callable per parent: grad_out -> grad contribution

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # ------------------------------------------------------------------
    # graph construction helpers
    # ------------------------------------------------------------------

    def _unary(self, out_data, vjp):
        return Tensor(out_data, parents=(self,), vjps=(vjp,))

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))

        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                if not parent.requires_grad:
                    continue
                contrib = vjp(g)
                # never let a parent's grad buffer alias this node's grad
                if contrib is g or contrib.base is not None:
                    contrib = contrib.copy()
                if parent.grad is None:
                    parent.grad = contrib
                else:
                    parent.grad += contrib

    def zero_grad(self):
        self.grad = None

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other):
        other = tensor(other)
        a, b = self, other
        return Tensor(
            a.data + b.data,
            parents=(a, b),
            vjps=(
                lambda g: _unbroadcast(g, a.data.shape),
                lambda g: _unbroadcast(g, b.data.shape),
            ),
        )

    __radd__ = __add__

    def __neg__(self):
        return self._unary(-self.data, lambda g: -g)

    def __sub__(self, other):
        return self + (-tensor(other))

    def __rsub__(self, other):
        return tensor(other) + (-self)

    def __mul__(self, other):
        other = tensor(other)
        a, b = self, other
        return Tensor(
            a.data * b.data,
            parents=(a, b),
            vjps=(
                lambda g: _unbroadcast(g * b.data, a.data.shape),
                lambda g: _unbroadcast(g * a.data, b.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = tensor(other)
        a, b = self, other
        return Tensor(
            a.data / b.data,
            parents=(a, b),
            vjps=(
                lambda g: _unbroadcast(g / b.data, a.data.shape),
                lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
            ),
        )

    def __matmul__(self, other):
        other = tensor(other)
        a, b = self, other
        return Tensor(
            a.data @ b.data,
            parents=(a, b),
            vjps=(lambda g: g @ b.data.T, lambda g: a.data.T @ g),
        )

    def __getitem__(self, idx):
        src = self

        def vjp(g):
            out = np.zeros_like(src.data)
            np.add.at(out, idx, g)
            return out

        return Tensor(self.data[idx], parents=(self,), vjps=(vjp,))

    # ------------------------------------------------------------------
    # shape ops
    # ------------------------------------------------------------------

    def reshape(self, *shape):
        src_shape = self.data.shape
        return self._unary(
            self.data.reshape(*shape), lambda g: g.reshape(src_shape)
        )

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.data.ndim)))
        inv = np.argsort(axes)
        return self._unary(
            self.data.transpose(axes), lambda g: g.transpose(inv)
        )

    @property
    def T(self):
        return self.transpose()

    def sum(self, axis=None, keepdims=False):
        src_shape = self.data.shape

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g, src_shape).copy()
            if not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, src_shape).copy()

        return self._unary(self.data.sum(axis=axis, keepdims=keepdims), vjp)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


def tensor(x, requires_grad: bool = False) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, requires_grad=requires_grad)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] > 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# nonlinearities and reductions
# ---------------------------------------------------------------------------


def gelu(x: Tensor) -> Tensor:
    """GeLU in its tanh form; the VJP differentiates the same expression."""
    x = tensor(x)
    d = x.data
    t = np.tanh(_GELU_K * (d + _GELU_C * d * d * d))
    half_one_plus_t = 0.5 * (1.0 + t)

    def vjp(g):
        du = _GELU_K * (1.0 + 3.0 * _GELU_C * d * d)
        return g * (half_one_plus_t + 0.5 * d * (1.0 - t * t) * du)

    return x._unary(d * half_one_plus_t, vjp)


def sigmoid(x: Tensor) -> Tensor:
    x = tensor(x)
    s = 1.0 / (1.0 + np.exp(-np.clip(x.data, -500, 500)))
    return x._unary(s, lambda g: g * s * (1.0 - s))


def relu(x: Tensor) -> Tensor:
    x = tensor(x)
    mask = x.data > 0
    return x._unary(x.data * mask, lambda g: g * mask)


def exp(x: Tensor) -> Tensor:
    x = tensor(x)
    e = np.exp(x.data)
    return x._unary(e, lambda g: g * e)


def log(x: Tensor) -> Tensor:
    x = tensor(x)
    return x._unary(np.log(x.data), lambda g: g / x.data)


def absval(x: Tensor) -> Tensor:
    x = tensor(x)
    s = np.sign(x.data)
    return x._unary(np.abs(x.data), lambda g: g * s)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    a, b = tensor(a), tensor(b)
    take_a = a.data <= b.data  # ties go to the left argument
    return Tensor(
        np.minimum(a.data, b.data),
        parents=(a, b),
        vjps=(
            lambda g: _unbroadcast(g * take_a, a.data.shape),
            lambda g: _unbroadcast(g * ~take_a, b.data.shape),
        ),
    )


def maximum(a: Tensor, b: Tensor) -> Tensor:
    a, b = tensor(a), tensor(b)
    take_a = a.data >= b.data
    return Tensor(
        np.maximum(a.data, b.data),
        parents=(a, b),
        vjps=(
            lambda g: _unbroadcast(g * take_a, a.data.shape),
            lambda g: _unbroadcast(g * ~take_a, b.data.shape),
        ),
    )


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (g - (g * y).sum(axis=axis, keepdims=True)) * y

    return x._unary(y, vjp)


def gather_rows(table: Tensor, indices) -> Tensor:
    """Row lookup (embeddings); gradient scatter-adds into the table."""
    table = tensor(table)
    idx = np.asarray(indices, dtype=np.int64)

    def vjp(g):
        out = np.zeros_like(table.data)
        np.add.at(out, idx, g)
        return out

    return Tensor(table.data[idx], parents=(table,), vjps=(vjp,))


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbor upsampling of the two leading spatial axes."""
    x = tensor(x)
    h, w = x.data.shape[:2]
    up = x.data.repeat(factor, axis=0).repeat(factor, axis=1)

    def vjp(g):
        rest = g.shape[2:]
        return g.reshape(h, factor, w, factor, *rest).sum(axis=(1, 3))

    return x._unary(up, vjp)


# ---------------------------------------------------------------------------
# losses (numerically stable primitives)
# ---------------------------------------------------------------------------


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross entropy between logits and soft targets."""
    logits = tensor(logits)
    z = logits.data
    y = np.asarray(targets, dtype=np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    s = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    return Tensor(
        loss.mean(), parents=(logits,), vjps=(lambda g: g * (s - y) / n,)
    )


def softmax_cross_entropy(logits: Tensor, target_index: int) -> Tensor:
    """Cross entropy of a single class index against a logit vector."""
    logits = tensor(logits)
    z = logits.data
    zmax = z.max()
    logsumexp = zmax + np.log(np.exp(z - zmax).sum())
    p = np.exp(z - logsumexp)

    def vjp(g):
        grad = p.copy()
        grad[target_index] -= 1.0
        return g * grad

    return Tensor(logsumexp - z[target_index], parents=(logits,), vjps=(vjp,))


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


def finite_difference_check(
    loss_fn,
    params: dict[str, Tensor],
    h: float = 1e-4,
    floor: float = 1e-6,
) -> dict[str, float]:
    """Max relative error of analytic vs central-difference gradients.

    ``loss_fn`` must rebuild the forward graph from ``params`` on every
    call and return a scalar Tensor. Relative error per element is
    |analytic - numeric| / max(floor, |analytic| + |numeric|); the floor
    keeps float64 roundoff on near-zero gradients (absolute noise around
    1e-11 at h = 1e-4) from registering while still flagging errors at
    any element's own magnitude.
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: p.grad.copy() for name, p in params.items()}

    errors: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.ravel()
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn().data)
            flat[i] = orig - h
            down = float(loss_fn().data)
            flat[i] = orig
            numeric[i] = (up - down) / (2.0 * h)
        a = analytic[name].ravel()
        scale = np.maximum(floor, np.abs(a) + np.abs(numeric))
        errors[name] = float(np.max(np.abs(a - numeric) / scale))
    return errors
