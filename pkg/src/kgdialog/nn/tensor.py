"""Reverse-mode automatic differentiation over numpy arrays.

Graphs are built eagerly and are single-threaded. float32 is the working
precision for model parameters; float64 inputs keep their dtype so numeric
gradient checks stay meaningful. Tensors are treated as immutable once an
op has recorded them.
"""

from __future__ import annotations

import numpy as np

_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward op."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            raise TypeError("Tensor cannot wrap another Tensor; use .detach()")
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # ---- basic introspection ----------------------------------------.

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

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def _accum(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, copy=True)
        else:
            self.grad = self.grad + g

    # ---- graph construction -----------------------------------------.

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # ---- arithmetic ---------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        out_data = self.data + other.data

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.data.shape))

        return _make(out_data, (self, other), bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        out_data = self.data - other.data

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g, b.data.shape))

        return _make(out_data, (self, other), bw)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out_data = self.data * other.data

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.data.shape))

        return _make(out_data, (self, other), bw)

    __rmul__ = __mul__

    def __neg__(self):
        out_data = -self.data

        def bw(g, a=self):
            if a.requires_grad:
                a._accum(-g)

        return _make(out_data, (self,), bw)

    def __truediv__(self, other):
        other = self._coerce(other)
        out_data = self.data / other.data

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        return _make(out_data, (self, other), bw)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out_data = self.data ** exponent

        def bw(g, a=self, e=exponent):
            if a.requires_grad:
                a._accum(g * e * a.data ** (e - 1))

        return _make(out_data, (self,), bw)

    def __matmul__(self, other):
        other = self._coerce(other)
        a, b = self.data, other.data
        out_data = np.matmul(a, b)

        def bw(g, ta=self, tb=other):
            if ta.ndim == 1 and tb.ndim == 1:
                if ta.requires_grad:
                    ta._accum(g * tb.data)
                if tb.requires_grad:
                    tb._accum(g * ta.data)
            elif ta.ndim == 1 and tb.ndim == 2:
                if ta.requires_grad:
                    ta._accum(tb.data @ g)
                if tb.requires_grad:
                    tb._accum(np.outer(ta.data, g))
            elif ta.ndim == 2 and tb.ndim == 1:
                if ta.requires_grad:
                    ta._accum(np.outer(g, tb.data))
                if tb.requires_grad:
                    tb._accum(ta.data.T @ g)
            else:
                if ta.requires_grad:
                    ta._accum(_unbroadcast(np.matmul(g, np.swapaxes(tb.data, -1, -2)), ta.data.shape))
                if tb.requires_grad:
                    tb._accum(_unbroadcast(np.matmul(np.swapaxes(ta.data, -1, -2), g), tb.data.shape))

        return _make(out_data, (self, other), bw)

    # ---- reductions / shape ------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g, a=self, ax=axis, kd=keepdims):
            if not a.requires_grad:
                return
            if ax is None:
                a._accum(np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False))
            else:
                gg = g if kd else np.expand_dims(g, ax)
                a._accum(np.broadcast_to(gg, a.data.shape).astype(a.data.dtype, copy=False))

        return _make(out_data, (self,), bw)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = self.data.reshape(shape)

        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g.reshape(a.data.shape))

        return _make(out_data, (self,), bw)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        out_data = self.data.transpose(axes)
        inv = np.argsort(axes)

        def bw(g, a=self, inv=tuple(inv)):
            if a.requires_grad:
                a._accum(g.transpose(inv))

        return _make(out_data, (self,), bw)

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        out_data = self.data[idx]
        if not isinstance(out_data, np.ndarray):
            out_data = np.asarray(out_data)
        else:
            out_data = out_data.copy()

        def bw(g, a=self, idx=idx):
            if a.requires_grad:
                buf = np.zeros_like(a.data)
                np.add.at(buf, idx, g)
                a._accum(buf)

        return _make(out_data, (self,), bw)

    def take_rows(self, ids) -> "Tensor":
        """Gather rows along axis 0 (embedding lookup)."""
        ids = np.asarray(ids, dtype=np.int64)
        out_data = self.data[ids]

        def bw(g, a=self, ids=ids):
            if a.requires_grad:
                buf = np.zeros_like(a.data)
                np.add.at(buf, ids, g)
                a._accum(buf)

        return _make(out_data, (self,), bw)

    # ---- elementwise nonlinearities ----------------------------------

    def exp(self):
        out_data = np.exp(self.data)

        def bw(g, a=self, o=out_data):
            if a.requires_grad:
                a._accum(g * o)

        return _make(out_data, (self,), bw)

    def log(self):
        out_data = np.log(self.data)

        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g / a.data)

        return _make(out_data, (self,), bw)

    def tanh(self):
        out_data = np.tanh(self.data)

        def bw(g, a=self, o=out_data):
            if a.requires_grad:
                a._accum(g * (1.0 - o * o))

        return _make(out_data, (self,), bw)

    def sigmoid(self):
        x = self.data
        z = np.exp(-np.abs(x))
        out_data = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype, copy=False)

        def bw(g, a=self, o=out_data):
            if a.requires_grad:
                a._accum(g * o * (1.0 - o))

        return _make(out_data, (self,), bw)

    def relu(self):
        out_data = np.maximum(self.data, 0)

        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g * (a.data > 0))

        return _make(out_data, (self,), bw)

    def sqrt(self):
        out_data = np.sqrt(self.data)

        def bw(g, a=self, o=out_data):
            if a.requires_grad:
                a._accum(g * 0.5 / o)

        return _make(out_data, (self,), bw)

    # ---- backward pass -------------------------------------------------

    def backward(self):
        """Populate .grad on every reachable tensor with requires_grad.

        The loss must be a scalar. Repeated calls accumulate another unit
        seed into leaf gradients; intermediate node gradients are reset at
        the start of each call.
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        for node in topo:
            if node._parents:
                node.grad = None
        self._accum(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _make(out_data, parents, backward):
    if _grad_enabled and any(p.requires_grad for p in parents):
        out = Tensor.__new__(Tensor)
        out.data = out_data
        out.grad = None
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        return out
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    return out


def cat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("cat() of empty sequence")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g, ts=tensors, off=offsets, ax=axis):
        for i, t in enumerate(ts):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(off[i], off[i + 1])
                t._accum(g[tuple(sl)])

    return _make(out_data, tuple(tensors), bw)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("stack() of empty sequence")
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def bw(g, ts=tensors, ax=axis):
        for i, t in enumerate(ts):
            if t.requires_grad:
                t._accum(np.take(g, i, axis=ax))

    return _make(out_data, tuple(tensors), bw)


def scatter_add(values: Tensor, ids, size: int) -> Tensor:
    """out[..., v] = sum of values[..., i] over positions i with ids[i] == v."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or ids.shape[0] != values.shape[-1]:
        raise ValueError("ids must be 1-d and match the last axis of values")
    out_shape = values.shape[:-1] + (size,)
    out_data = np.zeros(out_shape, dtype=values.dtype)
    if values.ndim == 1:
        np.add.at(out_data, ids, values.data)
    elif values.ndim == 2:
        rows = np.arange(values.shape[0])[:, None]
        np.add.at(out_data, (rows, ids[None, :]), values.data)
    else:
        raise ValueError("scatter_add supports 1-d or 2-d values")

    def bw(g, a=values, ids=ids):
        if a.requires_grad:
            a._accum(g[..., ids])

    return _make(out_data, (values,), bw)


def zeros(shape, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)
