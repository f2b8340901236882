"""Dense tensors with reverse-mode automatic differentiation.

numpy holds the data; each operation records a backward closure and
backward() replays them in reverse topological order. float32 is the
training dtype, float64 exists for gradient and oracle checks.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation forward passes)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


def grad_enabled() -> bool:
    return _grad_enabled


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    # -- graph construction ------------------------------------------------

    def backward(self) -> None:
        """Populate .grad on every reachable requires_grad tensor.

        Only defined for scalar outputs (losses).
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            if other.dtype != self.dtype:
                raise ValueError(f"dtype mismatch: {self.dtype} vs {other.dtype}")
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other):
        other = self._coerce(other)
        out = _node(self.data + other.data, (self, other))
        if out.requires_grad:

            def bwd(g):
                if self.requires_grad:
                    self.accumulate_grad(unbroadcast(g, self.shape))
                if other.requires_grad:
                    other.accumulate_grad(unbroadcast(g, other.shape))

            out._backward = bwd
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = self._coerce(other)
        out = _node(self.data * other.data, (self, other))
        if out.requires_grad:

            def bwd(g):
                if self.requires_grad:
                    self.accumulate_grad(unbroadcast(g * other.data, self.shape))
                if other.requires_grad:
                    other.accumulate_grad(unbroadcast(g * self.data, other.shape))

            out._backward = bwd
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __matmul__(self, other):
        other = self._coerce(other)
        if self.ndim != 2 or other.ndim != 2:
            raise ValueError("matmul is defined for 2-d tensors")
        out = _node(self.data @ other.data, (self, other))
        if out.requires_grad:

            def bwd(g):
                if self.requires_grad:
                    self.accumulate_grad(g @ other.data.T)
                if other.requires_grad:
                    other.accumulate_grad(self.data.T @ g)

            out._backward = bwd
        return out

    # -- reductions and shape ----------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = _node(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out.requires_grad:
            shape = self.shape

            def bwd(g):
                gg = g
                if axis is not None and not keepdims:
                    gg = np.expand_dims(gg, axis)
                self.accumulate_grad(np.broadcast_to(gg, shape).astype(self.dtype))

            out._backward = bwd
        return out

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = 1
            for a in axes:
                count *= self.shape[a]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _node(self.data.reshape(shape), (self,))
        if out.requires_grad:
            orig = self.shape

            def bwd(g):
                self.accumulate_grad(g.reshape(orig))

            out._backward = bwd
        return out

    def moveaxis(self, src: int, dst: int):
        out = _node(np.ascontiguousarray(np.moveaxis(self.data, src, dst)), (self,))
        if out.requires_grad:

            def bwd(g):
                self.accumulate_grad(np.ascontiguousarray(np.moveaxis(g, dst, src)))

            out._backward = bwd
        return out

    def max(self, axis: int):
        """Maximum over one axis; gradient goes to the first argmax."""
        idx = np.argmax(self.data, axis=axis)
        out_data = np.take_along_axis(self.data, np.expand_dims(idx, axis), axis).squeeze(axis)
        out = _node(out_data, (self,))
        if out.requires_grad:

            def bwd(g):
                gx = np.zeros_like(self.data)
                np.put_along_axis(gx, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
                self.accumulate_grad(gx)

            out._backward = bwd
        return out

    def index_select(self, idx: np.ndarray):
        """Rows self[idx] along axis 0; repeated indices accumulate gradient."""
        idx = np.asarray(idx, dtype=np.int64)
        out = _node(self.data[idx], (self,))
        if out.requires_grad:

            def bwd(g):
                gx = np.zeros_like(self.data)
                np.add.at(gx, idx, g)
                self.accumulate_grad(gx)

            out._backward = bwd
        return out


def _node(data: np.ndarray, parents: tuple) -> Tensor:
    """Result tensor wired into the graph when recording is on."""
    t = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        t.requires_grad = True
        t._parents = parents
    return t


def relu(x: Tensor) -> Tensor:
    out = _node(np.maximum(x.data, 0), (x,))
    if out.requires_grad:
        mask = x.data > 0

        def bwd(g):
            x.accumulate_grad(g * mask)

        out._backward = bwd
    return out


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    s[~pos] = e / (1.0 + e)
    out = _node(s, (x,))
    if out.requires_grad:

        def bwd(g):
            x.accumulate_grad(g * s * (1.0 - s))

        out._backward = bwd
    return out
