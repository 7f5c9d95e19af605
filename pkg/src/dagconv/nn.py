"""DCN, PDCN and the DAG-agnostic baselines (FB-GCNN, GCN, MLP).

All models take node features of shape ``(n, F)`` or a batch ``(B, n, F)`` and return
the same layout with ``F_out`` features. Hidden layers use the configured activation;
the last layer is linear unless ``final_activation`` is set.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .autograd import Tensor, parameter
from .dag import Dag
from .errors import ShapeMismatch
from .gso import CausalGsoSet


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def layer_widths(in_features: int, hidden: int, out_features: int, layers: int) -> list[tuple[int, int]]:
    if layers < 1:
        return []
    dims = [in_features] + [hidden] * (layers - 1) + [out_features]
    return list(zip(dims[:-1], dims[1:]))


class Model:
    """Parameter container plus forward pass. ``params`` keeps insertion order."""

    kind = "model"

    def __init__(self, activation: str = "relu", final_activation: str | None = None):
        self.params: dict[str, Tensor] = {}
        self.activation = activation
        self.final_activation = final_activation

    def __call__(self, x) -> Tensor:
        return self.forward(x)

    def forward(self, x) -> Tensor:
        x3, batched = self._as_batch(x)
        out = self._forward(x3)
        if not batched:
            out = ag.reshape(out, out.shape[1:])
        return out

    def _forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def _as_batch(self, x) -> tuple[Tensor, bool]:
        x = ag.as_tensor(x)
        if x.ndim == 2:
            return ag.reshape(x, (1,) + x.shape), False
        if x.ndim != 3:
            raise ShapeMismatch(f"expected (n, F) or (B, n, F) input, got {x.shape}")
        return x, True

    def _act(self, h: Tensor, last: bool) -> Tensor:
        name = self.final_activation if last else self.activation
        return h if name is None else ag.ACTIVATIONS[name](h)

    def _check_nodes(self, x: Tensor, n: int) -> None:
        if x.shape[1] != n:
            raise ShapeMismatch(f"input has {x.shape[1]} nodes, model expects {n}")

    def _check_features(self, x: Tensor, f: int) -> None:
        if x.shape[2] != f:
            raise ShapeMismatch(f"input has {x.shape[2]} features, model expects {f}")

    def parameter_count(self) -> int:
        return int(sum(p.value.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            v = np.asarray(state[k], dtype=float)
            if v.shape != p.shape:
                raise ShapeMismatch(f"{k}: stored shape {v.shape} vs {p.shape}")
            p.value = v.copy()

    def __repr__(self) -> str:
        return f"{type(self).__name__}(params={self.parameter_count()})"


class DCN(Model):
    """Stacked causal filterbanks: ``X <- act(sum_k S_k X Theta_k + b)``.

    Each ``theta{l}`` has shape ``(K, F_in, F_out)``, one slice per anchor. The layer
    sums over all ``K`` anchors, so the Glorot fan-in is ``K * F_in``.
    """

    kind = "dcn"

    def __init__(
        self,
        gsos: CausalGsoSet,
        in_features: int = 1,
        hidden: int = 32,
        out_features: int = 1,
        layers: int = 2,
        activation: str = "relu",
        final_activation: str | None = None,
        bias: bool = True,
        seed: int | None = 0,
    ):
        super().__init__(activation, final_activation)
        self.gsos = gsos
        rng = np.random.default_rng(seed)
        k = len(gsos)
        for l, (fi, fo) in enumerate(layer_widths(in_features, hidden, out_features, layers)):
            self.params[f"theta{l}"] = parameter(glorot(rng, (k, fi, fo), k * fi, fo), f"theta{l}")
            if bias:
                self.params[f"bias{l}"] = parameter(np.zeros(fo), f"bias{l}")
        self.layers = layers
        self.in_features = in_features

    @classmethod
    def from_weights(
        cls,
        gsos: CausalGsoSet,
        thetas: Sequence[np.ndarray],
        biases: Sequence[np.ndarray] | None = None,
        activation: str = "relu",
        final_activation: str | None = None,
    ) -> DCN:
        thetas = [np.asarray(t, dtype=float) for t in thetas]
        for t in thetas:
            if t.ndim != 3 or t.shape[0] != len(gsos):
                raise ShapeMismatch(f"theta of shape {t.shape} for {len(gsos)} anchors")
        m = cls.__new__(cls)
        Model.__init__(m, activation, final_activation)
        m.gsos = gsos
        m.layers = len(thetas)
        m.in_features = thetas[0].shape[1]
        for l, t in enumerate(thetas):
            if l and t.shape[1] != thetas[l - 1].shape[2]:
                raise ShapeMismatch(f"layer {l} expects {t.shape[1]} features, previous emits {thetas[l - 1].shape[2]}")
            m.params[f"theta{l}"] = parameter(t, f"theta{l}")
            if biases is not None:
                m.params[f"bias{l}"] = parameter(biases[l], f"bias{l}")
        return m

    def _forward(self, x: Tensor) -> Tensor:
        self._check_nodes(x, self.gsos.n)
        self._check_features(x, self.in_features)
        h = x
        for l in range(self.layers):
            h = causal_filterbank(self.gsos, h, self.params[f"theta{l}"])
            b = self.params.get(f"bias{l}")
            if b is not None:
                h = ag.add(h, b)
            h = self._act(h, last=l == self.layers - 1)
        return h


def causal_filterbank(gsos: CausalGsoSet, x: Tensor, theta: Tensor) -> Tensor:
    """``sum_k S_k X Theta_k`` for a batch ``X`` of shape ``(B, n, F_in)``.

    With node-major stacking the anchor sum is a single GEMM against ``Theta``
    flattened to ``(K*F_in, F_out)``. Shifts first when features grow and mixes
    first when they shrink, so the widest intermediate is ``(B, n, K*min(F_in, F_out))``.
    """
    bsz, n, fi = x.shape
    k, _, fo = theta.shape
    if fi <= fo:
        z = ag.reshape(ag.spmm(gsos.interleaved, x, gsos.interleaved_t), (bsz, n, k * fi))
        return ag.matmul(z, ag.reshape(theta, (k * fi, fo)))
    mix = ag.reshape(ag.transpose(theta, (1, 0, 2)), (fi, k * fo))
    y = ag.reshape(ag.matmul(x, mix), (bsz, n * k, fo))
    return ag.spmm(gsos.interleaved_h, y, gsos.interleaved_h_t)


def dcn_forward(p: DCN, g: CausalGsoSet, x) -> Tensor:
    """Run ``p`` on ``x`` using the operators in ``g`` (which may differ from the ones it was built with)."""
    if len(g) != len(p.gsos):
        raise ShapeMismatch(f"{len(g)} GSOs for a model with {len(p.gsos)} anchors")
    saved, p.gsos = p.gsos, g
    try:
        return p.forward(x)
    finally:
        p.gsos = saved


def simple_dcn(gsos: CausalGsoSet, taps: Sequence[np.ndarray], activation: str = "relu") -> DCN:
    """Scalar-tap DCN with the activation on every layer, as 1x1 filterbanks."""
    thetas = [np.asarray(t, dtype=float).reshape(len(gsos), 1, 1) for t in taps]
    return DCN.from_weights(gsos, thetas, activation=activation, final_activation=activation)


def simple_dcn_forward(gsos: CausalGsoSet, taps: Sequence[np.ndarray], x: np.ndarray, activation: str = "relu") -> np.ndarray:
    """Scalar-tap recursion evaluated with plain sparse products (no recording)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (gsos.n,):
        raise ShapeMismatch(f"simple DCN takes a length-{gsos.n} signal, got {x.shape}")
    for t in taps:
        t = np.asarray(t, dtype=float).ravel()
        if t.size != len(gsos):
            raise ShapeMismatch(f"{t.size} taps for {len(gsos)} GSOs")
        x = sum(tk * (g.mat @ x) for tk, g in zip(t, gsos.members))
        if activation == "relu":
            x = np.maximum(x, 0.0)
    return x


class SharedMLP:
    """Row-wise MLP whose weights live in a parent model's ``params``."""

    def __init__(self, owner: Model, widths: list[tuple[int, int]], rng: np.random.Generator, prefix: str = "mlp"):
        self.owner = owner
        self.names = []
        for l, (fi, fo) in enumerate(widths):
            w, b = f"{prefix}.w{l}", f"{prefix}.b{l}"
            owner.params[w] = parameter(glorot(rng, (fi, fo), fi, fo), w)
            owner.params[b] = parameter(np.zeros(fo), b)
            self.names.append((w, b))

    def __call__(self, h: Tensor) -> Tensor:
        last = len(self.names) - 1
        for l, (w, b) in enumerate(self.names):
            h = ag.add(ag.matmul(h, self.owner.params[w]), self.owner.params[b])
            h = self.owner._act(h, last=l == last)
        return h


class PDCN(Model):
    """Parallel branches ``MLP(S_k X)`` with one shared MLP, summed over anchors."""

    kind = "pdcn"

    def __init__(
        self,
        gsos: CausalGsoSet,
        in_features: int = 1,
        hidden: int = 128,
        out_features: int = 1,
        layers: int = 2,
        activation: str = "relu",
        final_activation: str | None = None,
        seed: int | None = 0,
    ):
        super().__init__(activation, final_activation)
        self.gsos = gsos
        self.in_features = in_features
        self.mlp = SharedMLP(self, layer_widths(in_features, hidden, out_features, layers), np.random.default_rng(seed))

    def _forward(self, x: Tensor) -> Tensor:
        self._check_nodes(x, self.gsos.n)
        self._check_features(x, self.in_features)
        bsz, n, fi = x.shape
        k = len(self.gsos)
        z = ag.reshape(ag.spmm(self.gsos.interleaved, x, self.gsos.interleaved_t), (bsz, n, k, fi))
        return ag.sum_(self.mlp(z), axis=2)


def pdcn_forward(p: PDCN, g: CausalGsoSet, x) -> Tensor:
    saved, p.gsos = p.gsos, g
    try:
        return p.forward(x)
    finally:
        p.gsos = saved


def adjacency_powers_forward(a: sp.csr_matrix, x: Tensor, thetas: Sequence[Tensor], a_t: sp.csr_matrix | None = None) -> Tensor:
    """``sum_r A^r X Theta_r`` with ``A^r X`` built by repeated sparse products."""
    out = ag.matmul(x, thetas[0])
    h = x
    for theta in thetas[1:]:
        h = ag.spmm(a, h, a_t)
        out = ag.add(out, ag.matmul(h, theta))
    return out


class FBGCNN(Model):
    """Filterbank GNN on powers of the adjacency matrix (taps ``0..R-1``)."""

    kind = "fb_gcnn"

    def __init__(
        self,
        dag: Dag,
        filter_order: int = 2,
        in_features: int = 1,
        hidden: int = 32,
        out_features: int = 1,
        layers: int = 2,
        activation: str = "relu",
        final_activation: str | None = None,
        transposed: bool = False,
        seed: int | None = 0,
    ):
        if filter_order < 1:
            raise ValueError("filter order R must be >= 1")
        super().__init__(activation, final_activation)
        a = dag.adjacency
        self.a = (a.T if transposed else a).tocsr()
        self.a_t = self.a.T.tocsr()
        self.n = dag.n
        self.in_features = in_features
        self.filter_order = filter_order
        self.layers = layers
        rng = np.random.default_rng(seed)
        for l, (fi, fo) in enumerate(layer_widths(in_features, hidden, out_features, layers)):
            for r in range(filter_order):
                self.params[f"theta{l}.{r}"] = parameter(glorot(rng, (fi, fo), filter_order * fi, fo), f"theta{l}.{r}")
            self.params[f"bias{l}"] = parameter(np.zeros(fo), f"bias{l}")

    def _forward(self, x: Tensor) -> Tensor:
        self._check_nodes(x, self.n)
        self._check_features(x, self.in_features)
        h = x
        for l in range(self.layers):
            thetas = [self.params[f"theta{l}.{r}"] for r in range(self.filter_order)]
            h = ag.add(adjacency_powers_forward(self.a, h, thetas, self.a_t), self.params[f"bias{l}"])
            h = self._act(h, last=l == self.layers - 1)
        return h


def gcn_operator(dag: Dag) -> sp.csr_matrix:
    """``D^{-1/2} (B + B^T + I) D^{-1/2}`` on the 0/1 edge pattern ``B``.

    Edge weights may be negative, so degrees come from the pattern; the self-loop keeps
    every degree positive.
    """
    a = (dag.adjacency != 0).astype(float)
    m = (a + a.T + sp.identity(dag.n)).tocsr()
    deg = np.asarray(m.sum(axis=1)).ravel()
    d = sp.diags(1.0 / np.sqrt(deg))
    return (d @ m @ d).tocsr()


class GCN(Model):
    kind = "gcn"

    def __init__(
        self,
        dag: Dag,
        in_features: int = 1,
        hidden: int = 32,
        out_features: int = 1,
        layers: int = 2,
        activation: str = "relu",
        final_activation: str | None = None,
        seed: int | None = 0,
    ):
        super().__init__(activation, final_activation)
        self.op = gcn_operator(dag)
        self.n = dag.n
        self.in_features = in_features
        self.layers = layers
        rng = np.random.default_rng(seed)
        for l, (fi, fo) in enumerate(layer_widths(in_features, hidden, out_features, layers)):
            self.params[f"w{l}"] = parameter(glorot(rng, (fi, fo), fi, fo), f"w{l}")
            self.params[f"b{l}"] = parameter(np.zeros(fo), f"b{l}")

    def _forward(self, x: Tensor) -> Tensor:
        self._check_nodes(x, self.n)
        self._check_features(x, self.in_features)
        h = x
        for l in range(self.layers):
            h = ag.spmm(self.op, ag.matmul(h, self.params[f"w{l}"]), self.op)  # op is symmetric
            h = self._act(ag.add(h, self.params[f"b{l}"]), last=l == self.layers - 1)
        return h


class MLP(Model):
    """Graph-agnostic per-node MLP."""

    kind = "mlp"

    def __init__(
        self,
        n: int,
        in_features: int = 1,
        hidden: int = 32,
        out_features: int = 1,
        layers: int = 2,
        activation: str = "relu",
        final_activation: str | None = None,
        seed: int | None = 0,
    ):
        super().__init__(activation, final_activation)
        self.n = n
        self.in_features = in_features
        self.mlp = SharedMLP(self, layer_widths(in_features, hidden, out_features, layers), np.random.default_rng(seed))

    def _forward(self, x: Tensor) -> Tensor:
        self._check_nodes(x, self.n)
        self._check_features(x, self.in_features)
        return self.mlp(x)


def baseline_forward(p: Model, x) -> Tensor:
    """Forward pass for FB-GCNN, GCN or MLP; the graph inputs live on the model."""
    if not isinstance(p, (FBGCNN, GCN, MLP)):
        raise TypeError(f"{type(p).__name__} is not a baseline model")
    return p.forward(x)


def fb_gcnn_forward(p: FBGCNN, x) -> Tensor:
    return p.forward(x)


def loss_mse(pred, target, mask=None) -> Tensor:
    return ag.mse(pred, target, mask)


def loss_cross_entropy(logits, label) -> Tensor:
    return ag.cross_entropy(logits, label)


def backward(model: Model, loss: Tensor) -> dict[str, np.ndarray]:
    """Clear, back-propagate, and return a copy of every parameter gradient."""
    model.zero_grad()
    loss.backward()
    return {k: (np.zeros_like(p.value) if p.grad is None else p.grad.copy()) for k, p in model.params.items()}
