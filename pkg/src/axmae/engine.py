"""Dense tensor engine with reverse-mode automatic differentiation.

Element storage is a row-major numpy array. Every operation that can
participate in training registers a backward closure, so calling
``Tensor.backward()`` on a scalar loss walks the graph in reverse
topological order and populates ``grad`` on every ``requires_grad``
ancestor, including intermediates. Gradients accumulate additively across
fan-out; callers are responsible for zeroing them between optimizer steps.

Precision is a process-global setting (:func:`set_default_dtype` or the
:func:`using_dtype` context manager). Float64 is the default so numerical
tests run in double precision; training runs may switch to float32.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tensor",
    "AdamState",
    "Adam",
    "adam_step",
    "DivergenceError",
    "set_default_dtype",
    "get_default_dtype",
    "using_dtype",
    "no_grad",
    "matmul",
    "softmax_last",
    "layer_norm",
    "gelu",
    "absolute",
    "tsum",
    "tmean",
    "reshape",
    "transpose",
    "gather",
    "concat",
    "narrow",
]

_ALLOWED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))
_default_dtype = np.dtype(np.float64)
_grad_enabled = True


class DivergenceError(RuntimeError):
    """Raised when a training loss becomes non-finite."""


def set_default_dtype(dtype) -> None:
    """Set the element dtype used for newly created tensors."""
    global _default_dtype
    dt = np.dtype(dtype)
    if dt not in _ALLOWED_DTYPES:
        raise ValueError(f"unsupported dtype {dt}; use float32 or float64")
    _default_dtype = dt


def get_default_dtype() -> np.dtype:
    return _default_dtype


@contextmanager
def using_dtype(dtype):
    """Temporarily switch the global element dtype."""
    global _default_dtype
    prev = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _default_dtype = prev


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=_default_dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def backward(self) -> None:
        """Backpropagate from a scalar root.

        Rejects non-scalar roots. After the call every ``requires_grad``
        node reachable from the root holds its accumulated gradient.
        """
        if self.values.size != 1:
            raise ValueError(
                f"backward requires a scalar root, got shape {self.values.shape}"
            )
        order = _toposort(self)
        self.grad = np.ones_like(self.values)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def transpose(self, axes):
        return transpose(self, axes)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=_default_dtype))


def _toposort(root: Tensor):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.values.dtype, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    # reduce a broadcast gradient back down to the operand's shape
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _node(values, parents, backward) -> Tensor:
    out = Tensor(values)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.values + b.values

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.values.shape))
        _accumulate(b, _unbroadcast(g, b.values.shape))

    return _node(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.values - b.values

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.values.shape))
        _accumulate(b, _unbroadcast(-g, b.values.shape))

    return _node(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.values * b.values

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.values, a.values.shape))
        _accumulate(b, _unbroadcast(g * a.values, b.values.shape))

    return _node(out, (a, b), backward)


def absolute(a) -> Tensor:
    a = _as_tensor(a)
    sign = np.sign(a.values)  # subgradient 0 at the kink
    out = np.abs(a.values)

    def backward(g):
        _accumulate(a, g * sign)

    return _node(out, (a,), backward)


_GELU_K0 = math.sqrt(2.0 / math.pi)
_GELU_K1 = 0.044715


def gelu(a) -> Tensor:
    """Smooth gated activation, tanh form with its exact derivative."""
    a = _as_tensor(a)
    x = a.values
    inner = _GELU_K0 * (x + _GELU_K1 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        dinner = _GELU_K0 * (1.0 + 3.0 * _GELU_K1 * x**2)
        local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner
        _accumulate(a, g * local)

    return _node(out, (a,), backward)


# reductions -------------------------------------------------------------


def _expand_reduced(g, axis, out_shape):
    if axis is None:
        return g.reshape((1,) * len(out_shape))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % len(out_shape) for a in axes)
    gg = g
    for a in sorted(axes):
        gg = np.expand_dims(gg, a)
    return gg


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.values.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        gg = g if keepdims or axis is None and g.ndim == a.values.ndim else _expand_reduced(g, axis, a.values.shape)
        _accumulate(a, np.broadcast_to(gg, a.values.shape))

    return _node(out, (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.values.mean(axis=axis, keepdims=keepdims)
    count = a.values.size if axis is None else np.prod(
        [a.values.shape[ax % a.values.ndim] for ax in ((axis,) if isinstance(axis, int) else axis)]
    )

    def backward(g):
        gg = g if keepdims else _expand_reduced(g, axis, a.values.shape)
        _accumulate(a, np.broadcast_to(gg, a.values.shape) / count)

    return _node(out, (a,), backward)


# structural -------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = a.values.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.values.shape))

    return _node(out, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(ax % a.values.ndim for ax in axes)
    out = a.values.transpose(axes)
    inverse = np.argsort(axes)

    def backward(g):
        _accumulate(a, g.transpose(inverse))

    return _node(out, (a,), backward)


def gather(a, indices, axis: int) -> Tensor:
    """Select rows along ``axis``; the backward pass scatter-adds."""
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ValueError(f"gather indices must be one-dimensional, got shape {idx.shape}")
    ax = axis % a.values.ndim
    if idx.size and (idx.min() < 0 or idx.max() >= a.values.shape[ax]):
        raise ValueError(
            f"gather index out of range for axis {ax} with extent {a.values.shape[ax]}"
        )
    out = np.take(a.values, idx, axis=ax)

    def backward(g):
        if not a.requires_grad:
            return
        buf = np.zeros_like(a.values)
        np.add.at(np.moveaxis(buf, ax, 0), idx, np.moveaxis(g, ax, 0))
        _accumulate(a, buf)

    return _node(out, (a,), backward)


def concat(parts, axis: int) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ValueError("concat requires at least one operand")
    ax = axis % parts[0].values.ndim
    out = np.concatenate([p.values for p in parts], axis=ax)
    sizes = [p.values.shape[ax] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        moved = np.moveaxis(g, ax, 0)
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(p, np.moveaxis(moved[start:stop], 0, ax))

    return _node(out, tuple(parts), backward)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    a = _as_tensor(a)
    ax = axis % a.values.ndim
    extent = a.values.shape[ax]
    if start < 0 or length < 0 or start + length > extent:
        raise ValueError(f"narrow [{start}:{start + length}] out of range for extent {extent}")
    sl = tuple(slice(start, start + length) if i == ax else slice(None) for i in range(a.values.ndim))
    out = a.values[sl]

    def backward(g):
        if not a.requires_grad:
            return
        buf = np.zeros_like(a.values)
        buf[sl] = g
        _accumulate(a, buf)

    return _node(out, (a,), backward)


# linear algebra and normalization ----------------------------------------


def matmul(a, b) -> Tensor:
    """Batched matrix product over the trailing two axes.

    Leading batch extents must agree or broadcast from 1. Both operands
    must have rank >= 2.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    av, bv = a.values, b.values
    if av.ndim < 2 or bv.ndim < 2:
        raise ValueError(f"matmul requires rank >= 2 operands, got {av.shape} and {bv.shape}")
    if av.shape[-1] != bv.shape[-2]:
        raise ValueError(
            f"matmul shape mismatch: {av.shape} @ {bv.shape} "
            f"(inner extents {av.shape[-1]} vs {bv.shape[-2]})"
        )
    for da, db in zip(av.shape[-3::-1], bv.shape[-3::-1]):
        if da != db and 1 not in (da, db):
            raise ValueError(
                f"matmul batch extents incompatible: {av.shape} @ {bv.shape}"
            )
    out = av @ bv

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(bv, -1, -2), av.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape))

    return _node(out, (a, b), backward)


def softmax_last(a) -> Tensor:
    """Numerically stabilized softmax over the last axis."""
    a = _as_tensor(a)
    if not np.all(np.isfinite(a.values)):
        raise ValueError("softmax_last input contains non-finite values")
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        _accumulate(a, p * (g - inner))

    return _node(p, (a,), backward)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if eps <= 0:
        raise ValueError(f"layer_norm eps must be positive, got {eps}")
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    width = a.values.shape[-1]
    if gain.values.shape != (width,) or bias.values.shape != (width,):
        raise ValueError(
            f"layer_norm gain/bias must have shape ({width},), "
            f"got {gain.values.shape} and {bias.values.shape}"
        )
    mu = a.values.mean(axis=-1, keepdims=True)
    centered = a.values - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.values + bias.values

    def backward(g):
        if a.requires_grad:
            gx = g * gain.values
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            _accumulate(a, (gx - m1 - xhat * m2) * inv)
        reduce_axes = tuple(range(g.ndim - 1))
        _accumulate(gain, (g * xhat).sum(axis=reduce_axes))
        _accumulate(bias, g.sum(axis=reduce_axes))

    return _node(out, (a, gain, bias), backward)


# optimizer ----------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment buffers plus the shared step counter.

    Buffers are created lazily on the first step and stay congruent with
    the parameter list they were created for.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def adam_step(params, state: AdamState) -> None:
    """Apply one bias-corrected update in place.

    Every parameter must carry a gradient; gradients are left untouched so
    the caller decides when to clear them.
    """
    params = list(params)
    missing = [i for i, p in enumerate(params) if p.grad is None]
    if missing:
        raise ValueError(f"adam_step: parameters without gradients at positions {missing}")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.values) for p in params]
        state.second_moment = [np.zeros_like(p.values) for p in params]
    if len(state.first_moment) != len(params):
        raise ValueError("adam_step: state was initialized for a different parameter list")
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**state.step_count
    bias2 = 1.0 - b2**state.step_count
    for p, m, v in zip(params, state.first_moment, state.second_moment):
        if m.shape != p.values.shape:
            raise ValueError("adam_step: parameter shape changed since state creation")
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.values -= state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)


class Adam:
    """Convenience wrapper binding an AdamState to a fixed parameter list."""

    def __init__(self, params, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(learning_rate=learning_rate, beta1=beta1,
                               beta2=beta2, epsilon=epsilon)

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
