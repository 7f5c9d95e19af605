"""DAG representation, topological ordering, permutation and weighted transitive closure.

Nodes are 0-indexed. An edge ``(i, j, w)`` means ``j -> i`` and sets ``A[i, j] = w``,
so rows of the adjacency matrix are targets and columns are sources.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CycleDetected, DagError, DuplicateEdge, SelfLoop, TooLarge

Edge = tuple[int, int, float]

CANONICAL_MAX_NODES = 6


@dataclass(frozen=True, eq=False)
class Dag:
    n: int
    edges: tuple[Edge, ...]
    order: tuple[int, ...]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix((self.n, self.n))
        rows, cols, vals = zip(*self.edges)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def parents(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        acc: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for i, j, w in self.edges:
            acc[i].append((j, w))
        return tuple(tuple(sorted(p)) for p in acc)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(i, j) for i, j, _ in self.edges}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self.n == other.n and sorted(self.edges) == sorted(other.edges)

    def __hash__(self) -> int:
        return hash((self.n, tuple(sorted(self.edges))))

    def __repr__(self) -> str:
        return f"Dag(n={self.n}, edges={len(self.edges)})"


def new_dag(n: int, edges: Iterable[Sequence[float]]) -> Dag:
    """Validate an edge list and build a :class:`Dag` with a Kahn topological order.

    Ties among ready nodes are broken by smallest index, so the order is deterministic.
    """
    if n < 1:
        raise DagError(f"node count must be >= 1, got {n}")
    clean: list[Edge] = []
    seen: set[tuple[int, int]] = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        w = float(e[2]) if len(e) > 2 else 1.0
        if not (0 <= i < n and 0 <= j < n):
            raise DagError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise SelfLoop(f"self-loop at node {i}")
        if (i, j) in seen:
            raise DuplicateEdge(f"duplicate edge ({i}, {j})")
        if w == 0.0:
            raise DagError(f"edge ({i}, {j}) has zero weight")
        seen.add((i, j))
        clean.append((i, j, w))

    children: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for i, j, _ in clean:
        children[j].append(i)
        indeg[i] += 1
    ready = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != n:
        raise CycleDetected(f"graph has a cycle through {n - len(order)} node(s)")
    return Dag(n=n, edges=tuple(clean), order=tuple(order))


@dataclass(frozen=True, eq=False)
class Closure:
    """Weighted transitive closure ``W = (I - A)^{-1}`` and its sparse inverse ``I - A``."""

    w: np.ndarray
    w_inv: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.w.shape[0]


def transitive_closure(d: Dag) -> Closure:
    # W = I + A W, so row i of W only needs the rows of its parents,
    # which are complete once we walk in topological order.
    n = d.n
    w = np.zeros((n, n))
    for i in d.order:
        row = w[i]
        row[i] = 1.0
        for j, a in d.parents[i]:
            row += a * w[j]
    w.setflags(write=False)
    w_inv = (sp.identity(n, format="csr") - d.adjacency).tocsr()
    w_inv.eliminate_zeros()
    return Closure(w=w, w_inv=w_inv)


def reachability_edges(c: Closure, tol: float = 1e-12) -> set[tuple[int, int]]:
    """Pairs ``(i, j)`` with ``i != j`` such that ``j`` reaches ``i``."""
    rows, cols = np.nonzero(np.abs(c.w) > tol)
    return {(int(i), int(j)) for i, j in zip(rows, cols) if i != j}


@dataclass(frozen=True)
class Permutation:
    """Relabeling ``i -> map[i]``. Its matrix ``P`` satisfies ``(P x)[map[i]] = x[i]``."""

    map: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.map) != list(range(len(self.map))):
            raise ValueError("permutation map is not a bijection on 0..n-1")

    @classmethod
    def identity(cls, n: int) -> Permutation:
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> Permutation:
        return cls(tuple(int(v) for v in rng.permutation(n)))

    def __len__(self) -> int:
        return len(self.map)

    def __call__(self, i: int) -> int:
        return self.map[i]

    def inverse(self) -> Permutation:
        inv = [0] * len(self.map)
        for i, p in enumerate(self.map):
            inv[p] = i
        return Permutation(tuple(inv))

    def matrix(self) -> np.ndarray:
        n = len(self.map)
        m = np.zeros((n, n))
        m[list(self.map), list(range(n))] = 1.0
        return m

    def apply(self, x: np.ndarray, axis: int = 0) -> np.ndarray:
        """Permute the entries of ``x`` along ``axis`` (the action of ``P``)."""
        x = np.asarray(x)
        out = np.empty_like(x)
        idx = [slice(None)] * x.ndim
        idx[axis] = list(self.map)
        out[tuple(idx)] = x
        return out


def permute_dag(d: Dag, p: Permutation) -> Dag:
    if len(p) != d.n:
        raise ValueError("permutation size does not match the DAG")
    return new_dag(d.n, [(p(i), p(j), w) for i, j, w in d.edges])


def canonical_small_dag(d: Dag) -> tuple[float, ...]:
    """Lexicographically smallest row-major adjacency over all relabelings.

    Two DAGs get the same code exactly when they are isomorphic (weights included).
    """
    if d.n > CANONICAL_MAX_NODES:
        raise TooLarge(f"canonical code is brute force; n={d.n} > {CANONICAL_MAX_NODES}")
    a = d.adjacency.toarray()
    best = None
    for perm in itertools.permutations(range(d.n)):
        # relabel so that new node q is old node perm[q]
        code = tuple(a[np.ix_(perm, perm)].ravel().tolist())
        if best is None or code < best:
            best = code
    return best


def read_edge_list(path: str | Path) -> Dag:
    """Parse the ``n=<count>`` header plus ``target,source,weight`` lines."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].replace(" ", "").startswith("n="):
        raise DagError(f"{path}: missing 'n=<count>' header")
    try:
        n = int(lines[0].split("=", 1)[1])
        edges = []
        for ln in lines[1:]:
            parts = [s.strip() for s in ln.split(",")]
            if len(parts) not in (2, 3):
                raise ValueError(ln)
            edges.append((int(parts[0]), int(parts[1]), float(parts[2]) if len(parts) == 3 else 1.0))
    except ValueError as exc:
        raise DagError(f"{path}: malformed line {exc}") from None
    return new_dag(n, edges)


def write_edge_list(d: Dag, path: str | Path) -> None:
    body = [f"n={d.n}"] + [f"{i},{j},{w!r}" for i, j, w in d.edges]
    Path(path).write_text("\n".join(body) + "\n")
