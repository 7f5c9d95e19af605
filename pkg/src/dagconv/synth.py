"""Random DAG models and synthetic task generators.

"First ``s`` nodes" always means the first ``s`` entries of ``dag.order``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dag import Dag, new_dag, transitive_closure
from .errors import DegenerateTask, InvalidParams, MaskCoversAll
from .filters import CausalFilter, build_filter, convolve
from .gso import gso_set, sample_anchors

REGRESSION_TASKS = ("diffusion", "imputation")


@dataclass(frozen=True, eq=False)
class TaskDataset:
    """Samples sharing one DAG.

    ``inputs`` is ``(M, n, F)``. Regression tasks keep ``targets`` as ``(M, n)``
    observations and optionally ``clean_targets`` (noise-free, used for scoring).
    Source identification keeps integer class ``targets`` indexing ``candidates``.
    """

    dag: Dag
    task: str
    inputs: np.ndarray
    targets: np.ndarray
    clean_targets: np.ndarray | None = None
    input_mask: np.ndarray | None = None
    target_mask: np.ndarray | None = None
    candidates: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def is_classification(self) -> bool:
        return self.task == "source_id"

    @property
    def score_targets(self) -> np.ndarray:
        return self.targets if self.clean_targets is None else self.clean_targets

    def subset(self, idx) -> TaskDataset:
        idx = np.asarray(idx, dtype=int)
        clean = None if self.clean_targets is None else self.clean_targets[idx]
        return replace(self, inputs=self.inputs[idx], targets=self.targets[idx], clean_targets=clean)


def _edge_weights(rng: np.random.Generator, count: int, weight_range, random_sign: bool) -> np.ndarray:
    if weight_range is None:
        w = np.ones(count)
    else:
        lo, hi = weight_range
        if not 0 < lo <= hi:
            raise InvalidParams(f"weight range must satisfy 0 < low <= high, got {weight_range}")
        w = rng.uniform(lo, hi, size=count)
    if random_sign:
        w *= rng.choice([-1.0, 1.0], size=count)
    return w


def er_dag(n: int, p: float, seed, weight_range: tuple[float, float] | None = None, random_sign: bool = False) -> Dag:
    """Erdos-Renyi DAG: each pair kept w.p. ``p``, oriented along a random node ranking.

    Edges have unit weight unless ``weight_range`` is given, in which case weights are
    drawn uniformly from it (and negated with probability 1/2 if ``random_sign``).
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidParams(f"edge probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    rank = rng.permutation(n)
    keep = np.triu(rng.random((n, n)) < p, k=1)
    lo, hi = np.nonzero(keep)  # positions in the ranking, lo < hi
    w = _edge_weights(rng, lo.size, weight_range, random_sign)
    return new_dag(n, [(int(rank[b]), int(rank[a]), float(wt)) for a, b, wt in zip(lo, hi, w)])


def sf_dag(
    n: int,
    m: int,
    m0: int,
    seed,
    weight_range: tuple[float, float] | None = None,
    random_sign: bool = False,
) -> Dag:
    """Preferential-attachment DAG grown from ``m0`` isolated seed nodes.

    Each new node links from ``m`` distinct existing nodes picked with probability
    proportional to ``degree + 1``; edges point existing -> new.
    """
    if not (1 <= m <= m0 < n):
        raise InvalidParams(f"need 1 <= m <= m0 < n, got m={m}, m0={m0}, n={n}")
    rng = np.random.default_rng(seed)
    degree = np.zeros(n)
    pairs = []
    for t in range(m0, n):
        w = degree[:t] + 1.0
        picks = rng.choice(t, size=m, replace=False, p=w / w.sum())
        for j in picks:
            pairs.append((t, int(j)))
            degree[j] += 1
        degree[t] += m
    w = _edge_weights(rng, len(pairs), weight_range, random_sign)
    return new_dag(n, [(i, j, float(wt)) for (i, j), wt in zip(pairs, w)])


def random_filter(d: Dag, n_anchors: int, seed, closure=None) -> CausalFilter:
    if not 1 <= n_anchors <= d.n:
        raise InvalidParams(f"n_anchors must be in [1, {d.n}], got {n_anchors}")
    rng = np.random.default_rng(seed)
    anchors = sample_anchors(d.n, n_anchors, rng)
    theta = rng.uniform(-1.0, 1.0, size=n_anchors)
    return build_filter(gso_set(d, closure, anchors), theta)


def add_noise(x: np.ndarray, normalized_power: float, seed) -> np.ndarray:
    """White Gaussian noise scaled per signal (last axis) to ``normalized_power * ||x||^2``."""
    if normalized_power < 0:
        raise InvalidParams("noise power must be non-negative")
    x = np.asarray(x, dtype=float)
    if normalized_power == 0:
        return x.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = x.shape[-1]
    sigma = np.sqrt(normalized_power * np.sum(x * x, axis=-1, keepdims=True) / n)
    return x + sigma * rng.standard_normal(x.shape)


def gen_diffusion_dataset(
    d: Dag,
    filt: CausalFilter,
    M: int,
    sparse_support_size: int,
    noise_power: float,
    seed,
) -> TaskDataset:
    if not 0 < sparse_support_size <= d.n:
        raise InvalidParams(f"support size must be in [1, {d.n}]")
    if M < 0:
        raise InvalidParams("M must be non-negative")
    rng = np.random.default_rng(seed)
    support = np.asarray(d.order[:sparse_support_size])
    x = np.zeros((M, d.n))
    x[:, support] = rng.standard_normal((M, sparse_support_size))
    y = convolve(filt, x.T).T if M else np.zeros((0, d.n))
    x_obs = add_noise(x, noise_power, rng)
    y_obs = add_noise(y, noise_power, rng)
    return TaskDataset(
        dag=d,
        task="diffusion",
        inputs=x_obs[:, :, None],
        targets=y_obs,
        clean_targets=y,
        meta={"support": support.tolist(), "noise_power": noise_power, "clean_inputs": x},
    )


def gen_source_id_dataset(
    d: Dag,
    filt: CausalFilter,
    M: int,
    candidate_count: int,
    seed,
    noise_power: float = 0.0,
) -> TaskDataset:
    """Inputs are diffused one-hot sources with candidate nodes zeroed; labels index ``candidates``."""
    if not 0 < candidate_count <= d.n:
        raise InvalidParams(f"candidate_count must be in [1, {d.n}]")
    rng = np.random.default_rng(seed)
    candidates = np.asarray(d.order[:candidate_count])
    labels = rng.integers(0, candidate_count, size=M)
    x = np.zeros((M, d.n))
    x[np.arange(M), candidates[labels]] = 1.0
    y = convolve(filt, x.T).T if M else np.zeros((0, d.n))
    observed = np.ones(d.n)
    observed[candidates] = 0.0
    y = add_noise(y, noise_power, rng) * observed
    dead = int(np.sum(~np.any(y != 0, axis=1)))
    if dead:
        warnings.warn(f"{dead} of {M} source-id samples are all-zero after masking", DegenerateTask, stacklevel=2)
    return TaskDataset(
        dag=d,
        task="source_id",
        inputs=y[:, :, None],
        targets=labels,
        input_mask=observed,
        candidates=candidates,
        meta={"sources": candidates[labels].tolist() if M else []},
    )


def source_nodes(d: Dag) -> np.ndarray:
    has_parent = np.zeros(d.n, dtype=bool)
    for i, _, _ in d.edges:
        has_parent[i] = True
    return np.flatnonzero(~has_parent)


def gen_source_driven_signals(d: Dag, M: int, seed, closure=None) -> np.ndarray:
    """Signals ``x = W c`` with standard-normal exogenous inputs ``c`` on the source nodes only.

    Every non-source value is then a fixed linear function of the sources, which makes
    masked non-source nodes exactly recoverable by the causal filter ``sum_{s source} S_s``.
    """
    c_src = source_nodes(d)
    w = (closure or transitive_closure(d)).w
    c = np.zeros((M, d.n))
    c[:, c_src] = np.random.default_rng(seed).standard_normal((M, c_src.size))
    return c @ w.T


def gen_imputation_split(
    signals: np.ndarray,
    d: Dag,
    masked_nodes: Sequence[int] | int,
    seed=None,
    mask_channel: bool = False,
) -> TaskDataset:
    """Hide ``masked_nodes`` in the inputs and ask for them back.

    An integer ``masked_nodes`` draws that many non-source nodes at random.
    """
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    if signals.shape[1] != d.n:
        raise InvalidParams(f"signals have {signals.shape[1]} columns, DAG has {d.n} nodes")
    if isinstance(masked_nodes, (int, np.integer)):
        pool = np.setdiff1d(np.arange(d.n), source_nodes(d))
        if not 0 < masked_nodes <= pool.size:
            raise InvalidParams(f"cannot mask {masked_nodes} of {pool.size} non-source nodes")
        rng = np.random.default_rng(seed)
        masked = np.sort(rng.choice(pool, size=int(masked_nodes), replace=False))
    else:
        masked = np.unique(np.asarray(list(masked_nodes), dtype=int))
    if masked.size == 0:
        raise InvalidParams("no nodes to mask")
    if masked.size >= d.n:
        raise MaskCoversAll("masking every node leaves no observations")
    if masked.min() < 0 or masked.max() >= d.n:
        raise InvalidParams("masked node out of range")
    target_mask = np.zeros(d.n)
    target_mask[masked] = 1.0
    observed = 1.0 - target_mask
    x = signals * observed
    feats = [x]
    if mask_channel:
        feats.append(np.broadcast_to(observed, x.shape))
    dead = int(np.sum(~np.any(signals[:, masked] != 0, axis=1)))
    if dead:
        warnings.warn(f"{dead} signals are zero on every masked node", DegenerateTask, stacklevel=2)
    return TaskDataset(
        dag=d,
        task="imputation",
        inputs=np.stack(feats, axis=-1),
        targets=signals.copy(),
        input_mask=observed,
        target_mask=target_mask,
        meta={"masked_nodes": masked.tolist()},
    )
