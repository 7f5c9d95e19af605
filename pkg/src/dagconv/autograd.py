"""Minimal record-and-replay reverse-mode differentiation over numpy arrays.

Only the primitives the models need are provided: elementwise add/mul, batched
matmul, two-operand einsum, sparse-dense products, ReLU, reshape, transpose, gather
along an axis, reductions, and the two training losses. Every op records its parents and a
closure that pushes the output gradient back; :meth:`Tensor.backward` replays the
record in reverse topological order.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EmptyMask, LabelOutOfRange, NoForwardRecorded, ShapeMismatch

_RECORDING = True


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording (inference, validation)."""
    global _RECORDING
    prev, _RECORDING = _RECORDING, False
    try:
        yield
    finally:
        _RECORDING = prev


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=float)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=float, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        if self._backward is None:
            raise NoForwardRecorded("no recorded computation leads to this tensor")
        if self.value.size != 1:
            raise ShapeMismatch("backward() needs a scalar output")
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node is not self:
                    node.grad = None  # intermediates only; leaves keep theirs

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(as_tensor(other), -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(value, name: str | None = None) -> Tensor:
    return Tensor(np.array(value, dtype=float, copy=True), requires_grad=True, name=name)


def _record(value: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(value)
    if _RECORDING and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _record(a.value + b.value, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _record(a.value * b.value, (a, b), back)


def matmul(x, w) -> Tensor:
    """``x @ w`` with ``x`` of shape ``(..., i)`` and a 2-D ``w`` of shape ``(i, o)``."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeMismatch(f"matmul {x.shape} @ {w.shape}")

    lead = x.shape[:-1]
    x2 = x.value.reshape(-1, x.shape[-1])  # one 2-D GEMM instead of a batched loop

    def back(g):
        g2 = g.reshape(-1, g.shape[-1])
        if x.requires_grad:
            x._accumulate((g2 @ w.value.T).reshape(x.shape))
        if w.requires_grad:
            w._accumulate(x2.T @ g2)

    return _record((x2 @ w.value).reshape(lead + (w.shape[1],)), (x, w), back)


def einsum(spec: str, a, b) -> Tensor:
    """Two-operand einsum. Every index of an operand must appear in the other operand or the output."""
    a, b = as_tensor(a), as_tensor(b)
    ins, out_sub = spec.replace(" ", "").split("->")
    a_sub, b_sub = ins.split(",")
    for sub, other in ((a_sub, b_sub), (b_sub, a_sub)):
        if any(c not in other and c not in out_sub for c in sub):
            raise ValueError(f"einsum {spec!r}: index summed out of a single operand")
    value = np.einsum(spec, a.value, b.value, optimize=True)

    def back(g):
        if a.requires_grad:
            a._accumulate(np.einsum(f"{out_sub},{b_sub}->{a_sub}", g, b.value, optimize=True))
        if b.requires_grad:
            b._accumulate(np.einsum(f"{out_sub},{a_sub}->{b_sub}", g, a.value, optimize=True))

    return _record(value, (a, b), back)


def _spmm_value(mat: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    bsz, n, f = x.shape
    flat = np.ascontiguousarray(x.transpose(1, 0, 2)).reshape(n, bsz * f)
    out = mat @ flat
    return out.reshape(mat.shape[0], bsz, f).transpose(1, 0, 2)


def spmm(mat: sp.spmatrix, x, mat_t: sp.spmatrix | None = None) -> Tensor:
    """Apply a constant sparse matrix to every sample: ``(B, n, F) -> (B, m, F)``.

    ``mat_t`` is an optional precomputed transpose reused by the backward pass.
    """
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[1] != mat.shape[1]:
        raise ShapeMismatch(f"sparse {mat.shape} applied to {x.shape}")

    def back(g):
        mt = mat_t if mat_t is not None else mat.T.tocsr()
        x._accumulate(_spmm_value(mt, g))

    return _record(_spmm_value(mat, x.value), (x,), back)


def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.value > 0  # subgradient 0 at 0

    def back(g):
        x._accumulate(g * on)

    return _record(np.where(on, x.value, 0.0), (x,), back)


def identity(x) -> Tensor:
    return as_tensor(x)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {"relu": relu, "identity": identity}


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)

    def back(g):
        x._accumulate(g.reshape(x.shape))

    return _record(x.value.reshape(shape), (x,), back)


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    inv = np.argsort(axes)

    def back(g):
        x._accumulate(g.transpose(inv))

    return _record(x.value.transpose(axes), (x,), back)


def take(x, index: Iterable[int], axis: int) -> Tensor:
    """Select entries along ``axis`` (used to restrict logits to candidate nodes)."""
    x = as_tensor(x)
    index = np.asarray(list(index), dtype=int)

    def back(g):
        full = np.zeros_like(x.value)
        sl = [slice(None)] * x.ndim
        sl[axis] = index
        np.add.at(full, tuple(sl), g)
        x._accumulate(full)

    return _record(np.take(x.value, index, axis=axis), (x,), back)


def sum_(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)

    def back(g):
        gg = g if axis is None else np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(gg, x.shape))

    return _record(np.sum(x.value, axis=axis), (x,), back)


def mean(x) -> Tensor:
    x = as_tensor(x)
    return mul(sum_(x), 1.0 / x.value.size)


def mse(pred, target, mask=None) -> Tensor:
    """Mean squared error over the nodes kept by ``mask`` (node axis is axis ``-1``)."""
    pred = as_tensor(pred)
    target = np.asarray(target.value if isinstance(target, Tensor) else target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    if mask is None:
        weight = np.ones(pred.shape[-1])
    else:
        weight = np.asarray(mask, dtype=float)
        if weight.shape != (pred.shape[-1],):
            raise ShapeMismatch(f"mask of length {weight.size} for {pred.shape[-1]} nodes")
    count = weight.sum() * (pred.value.size // pred.shape[-1])
    if count == 0:
        raise EmptyMask("mask selects no entries")
    diff = (pred.value - target) * weight

    def back(g):
        pred._accumulate(g * 2.0 * diff / count)

    return _record(np.asarray(np.sum(diff * diff) / count), (pred,), back)


def cross_entropy(logits, labels) -> Tensor:
    """Mean ``-log softmax(logits)[label]``; a 1-D ``logits`` is a single sample."""
    logits = as_tensor(logits)
    single = logits.ndim == 1
    z = logits.value[None, :] if single else logits.value
    lab = np.atleast_1d(np.asarray(labels, dtype=int))
    if lab.shape[0] != z.shape[0]:
        raise ShapeMismatch(f"{lab.shape[0]} labels for {z.shape[0]} samples")
    if lab.size and (lab.min() < 0 or lab.max() >= z.shape[1]):
        raise LabelOutOfRange(f"labels must lie in [0, {z.shape[1]})")
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    value = np.mean(logsum - shifted[rows, lab])

    def back(g):
        probs = np.exp(shifted - logsum[:, None])
        probs[rows, lab] -= 1.0
        grad = g * probs / z.shape[0]
        logits._accumulate(grad[0] if single else grad)

    return _record(np.asarray(value), (logits,), back)
