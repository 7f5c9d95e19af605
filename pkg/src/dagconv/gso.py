"""Causal graph-shift operators ``S_k = W D_k (I - A)`` and sets of them."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .dag import Closure, Dag, Permutation, transitive_closure
from .errors import DimensionMismatch, EmptySubset

ZERO_TOL = 1e-12


def indicator_matrix(c: Closure, d: Dag, k: int) -> np.ndarray:
    """Binary diagonal of ``D_k``: ones at ``k`` and every predecessor of ``k``."""
    if not 0 <= k < d.n:
        raise IndexError(f"anchor {k} out of range for n={d.n}")
    diag = (np.abs(c.w[k]) > ZERO_TOL).astype(float)
    diag[k] = 1.0
    return diag


@dataclass(frozen=True, eq=False)
class CausalGso:
    k: int
    mat: sp.csr_matrix
    d_diag: np.ndarray

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def dense(self) -> np.ndarray:
        return self.mat.toarray()


def causal_gso(c: Closure, d: Dag, k: int) -> CausalGso:
    d_diag = indicator_matrix(c, d, k)
    keep = np.flatnonzero(d_diag)
    # W D_k (I - A) only touches the rows of (I - A) selected by D_k
    mat = sp.csr_matrix(c.w[:, keep]) @ c.w_inv[keep]
    mat = sp.csr_matrix(mat)
    mat.data[np.abs(mat.data) <= ZERO_TOL] = 0.0
    mat.eliminate_zeros()
    mat.sort_indices()
    return CausalGso(k=k, mat=mat, d_diag=d_diag)


def apply_gso(s: CausalGso, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != s.n:
        raise DimensionMismatch(f"signal has {x.shape[0]} entries, GSO expects {s.n}")
    return s.mat @ x


ALL = "ALL"


@dataclass(frozen=True, eq=False)
class CausalGsoSet:
    dag: Dag
    members: tuple[CausalGso, ...]
    transposed: bool = False

    def __post_init__(self) -> None:
        if not self.members:
            raise EmptySubset("a GSO set needs at least one anchor")
        if len({m.k for m in self.members}) != len(self.members):
            raise ValueError("GSO set anchors must be distinct")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def n(self) -> int:
        return self.dag.n

    @property
    def anchors(self) -> tuple[int, ...]:
        return tuple(m.k for m in self.members)

    @cached_property
    def stacked(self) -> sp.csr_matrix:
        """All operators stacked vertically, shape ``(K*n, n)``."""
        return sp.vstack([m.mat for m in self.members], format="csr")

    @cached_property
    def interleaved(self) -> sp.csr_matrix:
        """Node-major vertical stack: row ``i*K + k`` is row ``i`` of ``S_k``."""
        k, n = len(self.members), self.n
        rows = np.arange(k * n).reshape(k, n).T.ravel()
        return self.stacked[rows].tocsr()

    @cached_property
    def interleaved_t(self) -> sp.csr_matrix:
        return self.interleaved.T.tocsr()

    @cached_property
    def interleaved_h(self) -> sp.csr_matrix:
        """Node-major horizontal stack: column ``j*K + k`` is column ``j`` of ``S_k``."""
        k, n = len(self.members), self.n
        cols = np.arange(k * n).reshape(k, n).T.ravel()
        return sp.hstack([m.mat for m in self.members], format="csc")[:, cols].tocsr()

    @cached_property
    def interleaved_h_t(self) -> sp.csr_matrix:
        return self.interleaved_h.T.tocsr()

    @cached_property
    def max_nnz(self) -> int:
        return max(m.mat.nnz for m in self.members)


def gso_set(
    d: Dag,
    c: Closure | None = None,
    subset: Sequence[int] | str = ALL,
    transposed: bool = False,
) -> CausalGsoSet:
    if c is None:
        c = transitive_closure(d)
    if isinstance(subset, str):
        if subset != ALL:
            raise ValueError(f"unknown subset spec {subset!r}")
        anchors = list(range(d.n))
    else:
        anchors = [int(k) for k in subset]
    if not anchors:
        raise EmptySubset("anchor subset is empty")
    if len(set(anchors)) != len(anchors):
        raise ValueError("anchor subset has repeated nodes")
    members = []
    for k in anchors:
        g = causal_gso(c, d, k)
        if transposed:
            g = CausalGso(k=g.k, mat=g.mat.T.tocsr(), d_diag=g.d_diag)
        members.append(g)
    return CausalGsoSet(dag=d, members=tuple(members), transposed=transposed)


def sample_anchors(n: int, count: int, rng: np.random.Generator) -> list[int]:
    """Uniform anchor subset without replacement, sorted."""
    if not 1 <= count <= n:
        raise EmptySubset(f"cannot sample {count} anchors from {n} nodes")
    return sorted(int(k) for k in rng.choice(n, size=count, replace=False))


def permute_gso(s: CausalGso, p: Permutation) -> CausalGso:
    inv = np.asarray(p.inverse().map)
    # (P M P^T)[p(i), p(j)] = M[i, j]
    mat = s.mat[inv][:, inv].tocsr()
    return CausalGso(k=p(s.k), mat=mat, d_diag=p.apply(s.d_diag))
