"""Empirical-risk training with Adam, dataset splitting and evaluation metrics."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .errors import LengthMismatch, ShapeMismatch, TooFewSamples, ZeroNormTarget
from .nn import Model
from .synth import TaskDataset

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 25
    epochs: int = 100
    weight_decay: float = 1e-4
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0 or self.weight_decay < 0:
            raise ValueError(f"invalid training config {self}")
        if self.loss not in ("mse", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class Metrics:
    nmse: float | None = None
    accuracy: float | None = None
    train_time_s: float = 0.0
    infer_time_s: float = 0.0

    @property
    def wall_time_s(self) -> float:
        return self.train_time_s + self.infer_time_s


def split_dataset(ds: TaskDataset, seed) -> tuple[TaskDataset, TaskDataset, TaskDataset]:
    """Seeded 70/20/10 split; rounding leftovers go to the training part."""
    m = len(ds)
    if m < 10:
        raise TooFewSamples(f"need at least 10 samples to split, got {m}")
    perm = np.random.default_rng(seed).permutation(m)
    n_val, n_test = (2 * m) // 10, m // 10
    n_train = m - n_val - n_test
    return (
        ds.subset(perm[:n_train]),
        ds.subset(perm[n_train : n_train + n_val]),
        ds.subset(perm[n_train + n_val :]),
    )


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with decoupled weight decay; arrays in ``params`` are updated in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        if weight_decay:
            p *= 1.0 - lr * weight_decay
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return params, state


def model_output(model: Model, ds: TaskDataset, inputs: np.ndarray) -> ag.Tensor:
    """Predictions ``(B, n)`` for regression, candidate logits ``(B, C)`` for source id."""
    out = model(inputs)
    if out.shape[-1] != 1:
        raise ShapeMismatch("task heads expect a single output feature")
    out = ag.reshape(out, out.shape[:-1])
    if ds.is_classification:
        out = ag.take(out, ds.candidates, axis=1)
    return out


def batch_loss(model: Model, ds: TaskDataset, idx: np.ndarray) -> ag.Tensor:
    out = model_output(model, ds, ds.inputs[idx])
    if ds.is_classification:
        return ag.cross_entropy(out, ds.targets[idx])
    return ag.mse(out, ds.targets[idx], ds.target_mask)


def dataset_loss(model: Model, ds: TaskDataset, batch_size: int = 200) -> float:
    with ag.no_grad():
        total, count = 0.0, 0
        for start in range(0, len(ds), batch_size):
            idx = np.arange(start, min(start + batch_size, len(ds)))
            total += float(batch_loss(model, ds, idx).value) * idx.size
            count += idx.size
    return total / max(count, 1)


def predict(model: Model, ds: TaskDataset, batch_size: int = 200) -> np.ndarray:
    chunks = []
    with ag.no_grad():
        for start in range(0, len(ds), batch_size):
            chunks.append(model_output(model, ds, ds.inputs[start : start + batch_size]).value)
    if not chunks:
        return np.zeros((0, len(ds.candidates) if ds.is_classification else ds.dag.n))
    return np.concatenate(chunks)


def train_model(
    model: Model,
    train: TaskDataset,
    val: TaskDataset,
    cfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], list[tuple[int, float, float]]]:
    """Minibatch Adam for ``cfg.epochs`` epochs, keeping the best-validation snapshot.

    The model is left holding the returned parameters.
    """
    rng = np.random.default_rng(cfg.seed)
    best = model.state_dict()
    best_val = np.inf
    history: list[tuple[int, float, float]] = []
    state = AdamState()
    values = {k: p.value for k, p in model.params.items()}
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(len(train))
        losses = []
        for start in range(0, len(train), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss = batch_loss(model, train, idx)
            model.zero_grad()
            loss.backward()
            grads = {k: p.grad for k, p in model.params.items() if p.grad is not None}
            adam_step(values, grads, state, cfg.learning_rate, cfg.weight_decay)
            losses.append(float(loss.value))
        val_loss = dataset_loss(model, val)
        train_loss = float(np.mean(losses)) if losses else float("nan")
        history.append((epoch, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best = model.state_dict()
        log.debug("epoch %d train %.5g val %.5g", epoch, train_loss, val_loss)
    model.load_state_dict(best)
    return best, history


def nmse(preds: np.ndarray, targets: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean over signals of ``||y - y_hat||^2 / ||y||^2``, restricted to ``mask`` nodes if given."""
    preds = np.atleast_2d(np.asarray(preds, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if preds.shape != targets.shape:
        raise ShapeMismatch(f"{preds.shape} vs {targets.shape}")
    if mask is not None:
        keep = np.asarray(mask, dtype=bool)
        preds, targets = preds[:, keep], targets[:, keep]
    denom = np.sum(targets**2, axis=1)
    if np.any(denom == 0):
        raise ZeroNormTarget("a target signal has zero norm")
    return float(np.mean(np.sum((targets - preds) ** 2, axis=1) / denom))


def accuracy(pred_labels, true_labels) -> float:
    pred_labels = np.asarray(pred_labels)
    true_labels = np.asarray(true_labels)
    if pred_labels.shape != true_labels.shape:
        raise LengthMismatch(f"{pred_labels.shape} vs {true_labels.shape}")
    if pred_labels.size == 0:
        return float("nan")
    return float(np.mean(pred_labels == true_labels))


def evaluate(model: Model, ds: TaskDataset) -> Metrics:
    t0 = time.perf_counter()
    out = predict(model, ds)
    elapsed = time.perf_counter() - t0
    if ds.is_classification:
        return Metrics(accuracy=accuracy(out.argmax(axis=1), ds.targets), infer_time_s=elapsed)
    return Metrics(nmse=nmse(out, ds.score_targets, ds.target_mask), infer_time_s=elapsed)
