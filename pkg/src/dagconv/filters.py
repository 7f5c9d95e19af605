"""Causal graph filters ``H = sum_k theta_k S_k`` and the least-squares tap estimator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimensionMismatch
from .gso import CausalGsoSet

LS_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class CausalFilter:
    gsos: CausalGsoSet
    theta: np.ndarray

    @property
    def n(self) -> int:
        return self.gsos.n

    def dense(self) -> np.ndarray:
        """Materialize ``H``. For tests and small graphs only."""
        h = np.zeros((self.n, self.n))
        for t, g in zip(self.theta, self.gsos.members):
            h += t * g.mat.toarray()
        return h


def build_filter(g: CausalGsoSet, theta) -> CausalFilter:
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != len(g):
        raise DimensionMismatch(f"{theta.size} taps for {len(g)} GSOs")
    theta = theta.copy()
    theta.setflags(write=False)
    return CausalFilter(gsos=g, theta=theta)


def shift_all(g: CausalGsoSet, x: np.ndarray) -> np.ndarray:
    """``[S_1 x, ..., S_K x]`` for ``x`` of shape ``(n,)`` or ``(n, m)``; returns ``(K, n, ...)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != g.n:
        raise DimensionMismatch(f"signal has {x.shape[0]} rows, graph has {g.n} nodes")
    out = g.stacked @ x
    return out.reshape((len(g), g.n) + x.shape[1:])


def convolve(f: CausalFilter, x: np.ndarray) -> np.ndarray:
    """``y = H x`` computed operator by operator; ``x`` may carry extra trailing columns."""
    z = shift_all(f.gsos, x)
    return np.tensordot(f.theta, z, axes=(0, 0))


def frequency_response(f: CausalFilter) -> np.ndarray:
    resp = np.zeros(f.n)
    for t, g in zip(f.theta, f.gsos.members):
        resp += t * g.d_diag
    return resp


def ls_design(g: CausalGsoSet, xs: np.ndarray) -> np.ndarray:
    """Regression matrix with one column per GSO, rows stacked over signals."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[1] != g.n:
        raise DimensionMismatch(f"signals have {xs.shape[1]} entries, graph has {g.n} nodes")
    z = shift_all(g, xs.T)  # (K, n, M)
    return z.transpose(2, 1, 0).reshape(-1, len(g))


def ls_fit(g: CausalGsoSet, pairs: Iterable[tuple[np.ndarray, np.ndarray]] | tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Minimum-norm least-squares taps for ``y ~ sum_k theta_k S_k x``.

    ``pairs`` is either an iterable of ``(x, y)`` or a tuple of stacked arrays ``(X, Y)``
    with one signal per row. Singular values below ``1e-10 * s_max`` are cut.
    """
    if isinstance(pairs, tuple) and len(pairs) == 2 and np.ndim(pairs[0]) == 2:
        xs, ys = (np.asarray(a, dtype=float) for a in pairs)
    else:
        pairs = list(pairs)
        if not pairs:
            raise DimensionMismatch("ls_fit needs at least one (x, y) pair")
        xs = np.stack([np.asarray(p[0], dtype=float) for p in pairs])
        ys = np.stack([np.asarray(p[1], dtype=float) for p in pairs])
    if xs.shape != ys.shape or xs.shape[1] != g.n:
        raise DimensionMismatch(f"pair shapes {xs.shape} / {ys.shape} for n={g.n}")
    design = ls_design(g, xs)
    theta, *_ = np.linalg.lstsq(design, ys.reshape(-1), rcond=LS_RCOND)
    return theta
