"""Reverse-mode automatic differentiation on dense float64 numpy arrays.

A ``Tensor`` wraps a value and, when it depends on differentiable inputs, a
closure that routes the output gradient to its parents. ``backward`` walks
the recorded graph in reverse topological order, accumulating into ``grad``.

Ops accept arbitrary leading batch dimensions; node/edge layouts are
``(..., n, F)`` and ``(..., n, n, F)``. The broadcast ops ``expand_src`` /
``expand_dst`` let pairwise maps like f(x_i, x_j, e_ij) be computed as
per-node linear maps plus broadcast adds instead of materializing the
concatenated (n, n, ·) input.
"""

import numpy as np


class Tensor:
    """Array with an accumulated gradient and an optional backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        # grad allocates lazily on first accumulation to avoid zero-fill churn
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad[...] = 0.0

    def item(self) -> float:
        return float(self.data)

    def backward(self, seed=None):
        if not self.requires_grad:
            raise ValueError("backward on a tensor that requires no grad")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        _acc(self, np.ones_like(self.data) if seed is None else seed)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    t = Tensor(data, requires_grad=True)
    t.grad = np.zeros_like(t.data)
    return t


def _make(data, parents, backward) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward)
    return Tensor(data)


def _acc(t: Tensor, g) -> None:
    if t.requires_grad:
        if t.grad is None:
            # copy: g may alias another tensor's gradient buffer
            t.grad = np.array(g)
        else:
            t.grad += g


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")

    def backward(g):
        _acc(a, g)
        _acc(b, g)

    return _make(a.data + b.data, (a, b), backward)


def add_n(tensors: list[Tensor]) -> Tensor:
    if not tensors:
        raise ValueError("add_n needs at least one tensor")
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors):
        raise ValueError("add_n shape mismatch")

    def backward(g):
        for t in tensors:
            _acc(t, g)

    total = tensors[0].data.copy()
    for t in tensors[1:]:
        total += t.data
    return _make(total, tuple(tensors), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch {a.shape} vs {b.shape}")

    def backward(g):
        _acc(a, g)
        _acc(b, -g)

    return _make(a.data - b.data, (a, b), backward)


def scale(x: Tensor, c: float) -> Tensor:
    def backward(g):
        _acc(x, c * g)

    return _make(c * x.data, (x,), backward)


def add_const(x: Tensor, c: float) -> Tensor:
    def backward(g):
        _acc(x, g)

    return _make(x.data + c, (x,), backward)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"elementwise_mul shape mismatch {a.shape} vs {b.shape}")

    def backward(g):
        _acc(a, g * b.data)
        _acc(b, g * a.data)

    return _make(a.data * b.data, (a, b), backward)


def linear(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: x @ W (+ b)."""
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"linear inner dims {x.shape[-1]} vs {W.shape[0]}")
    if b is not None and b.shape != (W.shape[1],):
        raise ValueError("bias shape must be (out,)")
    out = x.data @ W.data
    if b is not None:
        out = out + b.data

    def backward(g):
        _acc(x, g @ W.data.T)
        if W.requires_grad:
            _acc(W, x.data.reshape(-1, x.shape[-1]).T @ g.reshape(-1, W.shape[1]))
        if b is not None and b.requires_grad:
            _acc(b, g.reshape(-1, W.shape[1]).sum(axis=0))

    parents = (x, W) if b is None else (x, W, b)
    return _make(out, parents, backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0

    def backward(g):
        _acc(x, g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), backward)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)

    def backward(g):
        _acc(x, g * s * (1.0 - s))

    return _make(s, (x,), backward)


def concat(xs: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [x.shape[axis] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for x, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _acc(x, g[tuple(idx)])

    return _make(np.concatenate([x.data for x in xs], axis=axis), tuple(xs), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product; batch dimensions must match exactly."""
    if a.data.ndim != b.data.ndim or a.shape[:-2] != b.shape[:-2]:
        raise ValueError(f"matmul batch dims {a.shape} vs {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner dims {a.shape} vs {b.shape}")

    def backward(g):
        _acc(a, g @ np.swapaxes(b.data, -1, -2))
        _acc(b, np.swapaxes(a.data, -1, -2) @ g)

    return _make(a.data @ b.data, (a, b), backward)


def transpose_pair(x: Tensor) -> Tensor:
    """Swap the last two axes."""

    def backward(g):
        _acc(x, np.swapaxes(g, -1, -2))

    return _make(np.swapaxes(x.data, -1, -2), (x,), backward)


def expand_src(x: Tensor) -> Tensor:
    """(..., n, F) -> (..., n, n, F) with out[..., i, j, :] = x[..., i, :]."""
    n = x.shape[-2]
    out = np.broadcast_to(x.data[..., :, None, :], x.shape[:-2] + (n, n, x.shape[-1]))

    def backward(g):
        _acc(x, g.sum(axis=-2))

    return _make(out, (x,), backward)


def expand_dst(x: Tensor) -> Tensor:
    """(..., n, F) -> (..., n, n, F) with out[..., i, j, :] = x[..., j, :]."""
    n = x.shape[-2]
    out = np.broadcast_to(x.data[..., None, :, :], x.shape[:-2] + (n, n, x.shape[-1]))

    def backward(g):
        _acc(x, g.sum(axis=-3))

    return _make(out, (x,), backward)


def expand_to_nodes(x: Tensor, n: int) -> Tensor:
    """(..., F) -> (..., n, F), repeating the vector for every node."""
    out = np.broadcast_to(x.data[..., None, :], x.shape[:-1] + (n, x.shape[-1]))

    def backward(g):
        _acc(x, g.sum(axis=-2))

    return _make(out, (x,), backward)


def reduce_max(x: Tensor, axis: int) -> Tensor:
    """Maximum along one axis; gradient flows to the first argmax on ties."""
    idx = np.argmax(x.data, axis=axis)

    def backward(g):
        buf = np.zeros_like(x.data)
        np.put_along_axis(buf, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
        _acc(x, buf)

    out = np.take_along_axis(x.data, np.expand_dims(idx, axis), axis).squeeze(axis)
    return _make(out, (x,), backward)


def max_aggregate(messages: Tensor, adj: np.ndarray) -> Tensor:
    """Per-receiver max over senders: out[..., i, c] = max_j messages[..., i, j, c].

    ``adj`` masks which senders j each receiver i sees; the gradient routes to
    the argmax sender, lowest index on ties. Every receiver must have at
    least one sender.
    """
    adj = np.asarray(adj, dtype=bool)
    if adj.shape != messages.shape[:-1]:
        raise ValueError(f"adj shape {adj.shape} does not match messages {messages.shape}")
    if not np.all(adj.any(axis=-1)):
        raise ValueError("max_aggregate: node with no senders under adj")
    masked = np.where(adj[..., None], messages.data, -np.inf)
    idx = np.argmax(masked, axis=-2)

    def backward(g):
        buf = np.zeros_like(messages.data)
        np.put_along_axis(buf, idx[..., None, :], g[..., None, :], axis=-2)
        _acc(messages, buf)

    out = np.take_along_axis(masked, idx[..., None, :], axis=-2).squeeze(-2)
    return _make(out, (messages,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    def backward(g):
        _acc(x, g.reshape(x.shape))

    return _make(x.data.reshape(shape), (x,), backward)


def squeeze_last(x: Tensor) -> Tensor:
    """Drop a trailing singleton axis."""
    if x.shape[-1] != 1:
        raise ValueError(f"last axis must be 1, got {x.shape}")

    def backward(g):
        _acc(x, g[..., None])

    return _make(x.data[..., 0], (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    """Mean over every element, producing a scalar tensor."""
    count = x.data.size

    def backward(g):
        _acc(x, np.full_like(x.data, g / count))

    return _make(x.data.mean(), (x,), backward)


def grad_check(f, x: Tensor, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps the tensor to a scalar Tensor and must be smooth at ``x``
    (resample inputs near relu kinks or max ties before calling).
    """
    x.requires_grad = True
    x.grad = np.zeros_like(x.data)
    out = f(x)
    if out.shape != ():
        raise ValueError("grad_check needs a scalar-valued function")
    out.backward()
    analytic = x.grad.copy()

    worst = 0.0
    flat = x.data.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x).item()
        flat[i] = orig - h
        down = f(x).item()
        flat[i] = orig
        numeric = (up - down) / (2.0 * h)
        a = analytic.reshape(-1)[i]
        err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst
