"""Experiment configuration, data ingestion, trial orchestration and results bundles.

A run is a pure function of ``(config, seed)``. Each trial derives its own seed from
the base seed, then splits it into independent streams for the graph, the generating
filter, the data, the split, the model initialization, the anchor draw and minibatch
order. Bundles land in ``output_dir`` as plain CSV/YAML/NPZ files written atomically.
"""
from __future__ import annotations

import copy
import csv
import io
import logging
import os
import re
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from . import thames
from .dag import Dag, read_edge_list, transitive_closure, write_edge_list
from .errors import (
    ColumnMismatch,
    DegenerateTask,
    IncompatibleTaskModel,
    MalformedData,
    NumericalFailure,
    ParseError,
    UnknownKey,
)
from .filters import build_filter, convolve, ls_fit
from .gso import ALL, gso_set, sample_anchors
from .nn import DCN, GCN, MLP, PDCN, FBGCNN, Model
from .synth import (
    TaskDataset,
    er_dag,
    gen_diffusion_dataset,
    gen_imputation_split,
    gen_source_driven_signals,
    gen_source_id_dataset,
    random_filter,
    add_noise,
    sf_dag,
)
from .train import Metrics, TrainConfig, accuracy, evaluate, nmse, split_dataset, train_model

log = logging.getLogger(__name__)

TASKS = ("diffusion", "source_id", "imputation")
MODEL_KINDS = ("dcn", "dcn_t", "pdcn", "fb_gcnn", "gcn", "mlp", "ls")
GENERATORS = ("er", "sf", "file", "thames")
WORKERS_ENV = "DAGCONV_WORKERS"

# per-task training defaults
TRAIN_DEFAULTS = {
    "diffusion": dict(learning_rate=5e-4, batch_size=25, epochs=100, weight_decay=1e-4),
    "source_id": dict(learning_rate=5e-3, batch_size=25, epochs=100, weight_decay=1e-4),
    "imputation": dict(learning_rate=5e-4, batch_size=25, epochs=100, weight_decay=1e-4),
}
NOISE_DEFAULTS = {"diffusion": 0.05, "source_id": 0.0, "imputation": 0.0}


@dataclass
class GraphConfig:
    generator: str = "er"
    n: int = 100
    p: float = 0.2
    m: int = 11  # 979 edges at n=100, close to ER p=0.2
    m0: int = 11
    weight_range: tuple[float, float] | None = (0.2, 0.7)
    random_sign: bool = True
    path: str | None = None


@dataclass
class ModelConfig:
    kind: str = "dcn"
    anchors: Any = ALL  # "ALL", a count, or explicit node list
    layers: int = 2
    hidden: int | None = None  # 128 for pdcn, 32 otherwise
    filter_order: int = 2
    activation: str = "relu"

    @property
    def hidden_units(self) -> int:
        if self.hidden is not None:
            return self.hidden
        return 128 if self.kind == "pdcn" else 32


@dataclass
class DataConfig:
    M: int = 2000
    noise: float | None = None
    sparse_support: int = 25
    filter_anchors: int = 25
    tie_anchors: bool = False
    candidates: int = 25
    masked: Any = 6  # count of non-source nodes, or explicit list
    mask_file: str | None = None
    signals_file: str | None = None
    mask_channel: bool = False


@dataclass
class ExperimentConfig:
    task: str
    graph: GraphConfig = field(default_factory=GraphConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    trials: int = 1
    seed: int = 0
    output_dir: str | None = "results"
    name: str | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def noise(self) -> float:
        return NOISE_DEFAULTS[self.task] if self.data.noise is None else self.data.noise

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("flags")
        out["train"].pop("seed")
        out["train"].pop("loss")
        if out["graph"]["weight_range"] is not None:
            out["graph"]["weight_range"] = list(out["graph"]["weight_range"])
        return out


_TOP_KEYS = {"task", "graph", "model", "data", "train", "trials", "seed", "output_dir", "name"}
_TRAIN_KEYS = {"learning_rate", "batch_size", "epochs", "weight_decay"}


def _section(cls, raw, where: str):
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ParseError(f"'{where}' must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise UnknownKey(f"unknown key(s) in '{where}': {sorted(extra)}")
    return cls(**raw)


def config_from_dict(raw: Mapping) -> ExperimentConfig:
    """Validate a nested mapping and fill defaults."""
    if not isinstance(raw, Mapping):
        raise ParseError("config must be a mapping at the top level")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise UnknownKey(f"unknown top-level key(s): {sorted(extra)}")
    task = raw.get("task")
    if task is None:
        raise ParseError("config is missing 'task'")
    if task not in TASKS:
        raise ParseError(f"task must be one of {TASKS}, got {task!r}")
    try:
        graph = _section(GraphConfig, raw.get("graph"), "graph")
        model = _section(ModelConfig, raw.get("model"), "model")
        data = _section(DataConfig, raw.get("data"), "data")
    except TypeError as exc:
        raise ParseError(str(exc)) from None
    train_raw = raw.get("train") or {}
    if not isinstance(train_raw, Mapping):
        raise ParseError("'train' must be a mapping")
    extra = set(train_raw) - _TRAIN_KEYS
    if extra:
        raise UnknownKey(f"unknown key(s) in 'train': {sorted(extra)}")
    try:
        train = TrainConfig(
            **{**TRAIN_DEFAULTS[task], **train_raw},
            loss="cross_entropy" if task == "source_id" else "mse",
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad 'train' section: {exc}") from None
    if graph.weight_range is not None:
        graph.weight_range = tuple(float(v) for v in graph.weight_range)
    cfg = ExperimentConfig(
        task=task,
        graph=graph,
        model=model,
        data=data,
        train=train,
        trials=raw.get("trials", 1),
        seed=raw.get("seed", 0),
        output_dir=raw.get("output_dir", "results"),
        name=raw.get("name"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    g, m, d = cfg.graph, cfg.model, cfg.data
    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        raise ParseError(f"trials must be a positive integer, got {cfg.trials!r}")
    if g.generator not in GENERATORS:
        raise ParseError(f"graph.generator must be one of {GENERATORS}")
    if g.generator == "file" and not g.path:
        raise ParseError("graph.generator=file needs graph.path")
    if m.kind not in MODEL_KINDS:
        raise ParseError(f"model.kind must be one of {MODEL_KINDS}, got {m.kind!r}")
    if not (m.anchors == ALL or isinstance(m.anchors, (int, list))):
        raise ParseError("model.anchors must be ALL, a count, or a list of nodes")
    if m.kind == "ls" and d.mask_channel:
        raise IncompatibleTaskModel("ls uses a single input feature; drop data.mask_channel")
    if cfg.task != "imputation" and (d.mask_file or d.signals_file):
        raise IncompatibleTaskModel(f"mask/signal files only apply to imputation, not {cfg.task}")
    if cfg.task == "source_id" and m.kind == "ls":
        msg = "ls on source_id has no transposed variant; accuracy is reported but not comparable"
        warnings.warn(msg, stacklevel=3)
        cfg.flags.append(msg)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``5e-4`` as a float (YAML 1.1 insists on ``5.0e-4``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:\d+\.?\d*|\.\d+)[eE][-+]?\d+$"),
    list("-+0123456789."),
)


def _yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def set_path(raw: dict, dotted: str, value) -> None:
    """Set ``raw['a']['b'] = value`` for ``dotted='a.b'``, creating sections as needed."""
    keys = dotted.split(".")
    node = raw
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = node[k] = {}
        if not isinstance(nxt, dict):
            raise ParseError(f"cannot descend into non-section '{k}' of {dotted!r}")
        node = nxt
    node[keys[-1]] = value


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not of the form key.path=value")
        key, text = item.split("=", 1)
        set_path(raw, key.strip(), _yaml(text))
    return raw


def load_raw_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    try:
        raw = _yaml(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if raw is None:
        raise ParseError(f"{path}: empty config")
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return raw


def parse_config(path: str | Path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    return config_from_dict(apply_overrides(load_raw_config(path), overrides))


# ---------- ingestion ----------


def ingest_graph_csv(path: str | Path) -> Dag:
    return read_edge_list(path)


def ingest_signals_csv(path: str | Path, dag: Dag) -> list[np.ndarray]:
    """Rows of a ``node_0..node_{n-1}`` CSV as length-``n`` arrays."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        warnings.warn(f"{path}: no signals", stacklevel=2)
        return []
    header, body = [c.strip() for c in rows[0]], rows[1:]
    expected = [f"node_{i}" for i in range(dag.n)]
    if len(header) != dag.n:
        raise ColumnMismatch(f"{path}: {len(header)} columns, DAG has {dag.n} nodes")
    if header != expected:
        raise MalformedData(f"{path}: header must be node_0..node_{dag.n - 1}")
    if not body:
        warnings.warn(f"{path}: header only, no signals", stacklevel=2)
    out = []
    for lineno, r in enumerate(body, start=2):
        if len(r) != dag.n:
            raise ColumnMismatch(f"{path}:{lineno}: {len(r)} values, expected {dag.n}")
        try:
            out.append(np.array([float(v) for v in r]))
        except ValueError:
            raise MalformedData(f"{path}:{lineno}: non-numeric value") from None
    return out


def write_signals_csv(path: str | Path, signals: np.ndarray) -> None:
    signals = np.atleast_2d(signals)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"node_{i}" for i in range(signals.shape[1])])
    w.writerows([[repr(float(v)) for v in row] for row in signals])
    atomic_write_text(path, buf.getvalue())


def read_mask_file(path: str | Path) -> list[int]:
    out = []
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        try:
            out.append(int(ln))
        except ValueError:
            raise MalformedData(f"{path}: bad node index {ln!r}") from None
    return out


# ---------- building blocks ----------


@dataclass(frozen=True)
class TrialSeeds:
    graph: int
    filter: int
    data: int
    split: int
    model: int
    anchors: int
    train: int

    @classmethod
    def derive(cls, seed: int) -> TrialSeeds:
        kids = np.random.SeedSequence(seed).spawn(7)
        return cls(*(int(k.generate_state(1)[0]) for k in kids))


def trial_seeds(base_seed: int, trials: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(base_seed).generate_state(trials)]


def build_graph(g: GraphConfig, seed: int) -> Dag:
    if g.generator == "er":
        return er_dag(g.n, g.p, seed, g.weight_range, g.random_sign)
    if g.generator == "sf":
        return sf_dag(g.n, g.m, g.m0, seed, g.weight_range, g.random_sign)
    if g.generator == "file":
        return ingest_graph_csv(g.path)
    return thames.thames_dag()


def build_dataset(cfg: ExperimentConfig, d: Dag, closure, seeds: TrialSeeds) -> TaskDataset:
    data = cfg.data
    if cfg.task in ("diffusion", "source_id"):
        if data.tie_anchors:
            rng = np.random.default_rng(seeds.filter)
            anchors = sorted(d.order[: data.filter_anchors])
            filt = build_filter(gso_set(d, closure, anchors), rng.uniform(-1.0, 1.0, len(anchors)))
        else:
            filt = random_filter(d, data.filter_anchors, seeds.filter, closure)
        if cfg.task == "diffusion":
            return gen_diffusion_dataset(d, filt, data.M, data.sparse_support, cfg.noise, seeds.data)
        return gen_source_id_dataset(d, filt, data.M, data.candidates, seeds.data, noise_power=cfg.noise)
    if data.signals_file:
        signals = np.array(ingest_signals_csv(data.signals_file, d)).reshape(-1, d.n)
    else:
        signals = gen_source_driven_signals(d, data.M, seeds.data, closure)
    if data.mask_file:
        masked = read_mask_file(data.mask_file)
    elif cfg.graph.generator == "thames" and data.masked == DataConfig.masked:
        masked = thames.masked_nodes()
    else:
        masked = data.masked
    observed = add_noise(signals, cfg.noise, seeds.data + 1)
    ds = gen_imputation_split(observed, d, masked, seeds.split, mask_channel=data.mask_channel)
    return replace(ds, clean_targets=signals)


def resolve_anchors(spec, n: int, seed: int):
    if spec == ALL:
        return ALL
    if isinstance(spec, int):
        return sample_anchors(n, spec, np.random.default_rng(seed))
    return sorted(int(k) for k in spec)


class LinearLS:
    """Least-squares causal filter on the first input feature; used as a baseline model."""

    kind = "ls"

    def __init__(self, gsos):
        self.gsos = gsos
        self.theta = np.zeros(len(gsos))

    def fit(self, ds: TaskDataset) -> LinearLS:
        x = ds.inputs[..., 0]
        if ds.is_classification:
            y = np.zeros_like(x)
            y[np.arange(len(ds)), ds.candidates[ds.targets]] = 1.0
        else:
            y = ds.targets
        self.theta = ls_fit(self.gsos, (x, y))
        return self

    def predict(self, ds: TaskDataset) -> np.ndarray:
        out = convolve(build_filter(self.gsos, self.theta), ds.inputs[..., 0].T).T
        return out[:, ds.candidates] if ds.is_classification else out

    def parameter_count(self) -> int:
        return int(self.theta.size)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {"theta": self.theta.copy()}


def build_model(cfg: ExperimentConfig, d: Dag, closure, in_features: int, seeds: TrialSeeds):
    m = cfg.model
    common = dict(in_features=in_features, hidden=m.hidden_units, layers=m.layers, activation=m.activation, seed=seeds.model)
    if m.kind in ("dcn", "dcn_t", "pdcn", "ls"):
        anchors = resolve_anchors(m.anchors, d.n, seeds.anchors)
        g = gso_set(d, closure, anchors, transposed=m.kind == "dcn_t")
        if m.kind == "ls":
            return LinearLS(g)
        return PDCN(g, **common) if m.kind == "pdcn" else DCN(g, **common)
    if m.kind == "fb_gcnn":
        return FBGCNN(d, filter_order=m.filter_order, **common)
    if m.kind == "gcn":
        return GCN(d, **common)
    return MLP(d.n, **common)


def parameter_count(model) -> int:
    """Number of learnable scalars of a model, a LS baseline, or a name -> array mapping."""
    if isinstance(model, Mapping):
        return int(sum(np.asarray(getattr(v, "value", v)).size for v in model.values()))
    return int(model.parameter_count())


# ---------- trials and bundles ----------


@dataclass
class TrialResult:
    trial: int
    seed: int
    metrics: Metrics
    param_count: int
    n_nodes: int
    n_edges: int
    history: list[tuple[int, float, float]]
    params: dict[str, np.ndarray]

    def row(self) -> dict:
        m = self.metrics
        return {
            "trial": self.trial,
            "seed": self.seed,
            "nmse": m.nmse,
            "accuracy": m.accuracy,
            "train_time_s": m.train_time_s,
            "infer_time_s": m.infer_time_s,
            "wall_time_s": m.wall_time_s,
            "param_count": self.param_count,
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
        }


def run_trial(cfg: ExperimentConfig, trial: int, seed: int) -> TrialResult:
    seeds = TrialSeeds.derive(seed)
    d = build_graph(cfg.graph, seeds.graph)
    closure = transitive_closure(d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateTask)
        ds = build_dataset(cfg, d, closure, seeds)
    train, val, test = split_dataset(ds, seeds.split)
    model = build_model(cfg, d, closure, ds.inputs.shape[-1], seeds)
    t0 = time.perf_counter()
    if isinstance(model, LinearLS):
        model.fit(train)
        history = []
        train_time = time.perf_counter() - t0
        t1 = time.perf_counter()
        out = model.predict(test)
        infer_time = time.perf_counter() - t1
        if test.is_classification:
            metrics = Metrics(accuracy=accuracy(out.argmax(axis=1), test.targets))
        else:
            metrics = Metrics(nmse=nmse(out, test.score_targets, test.target_mask))
        metrics.infer_time_s = infer_time
    else:
        _, history = train_model(model, train, val, replace(cfg.train, seed=seeds.train))
        train_time = time.perf_counter() - t0
        metrics = evaluate(model, test)
    metrics.train_time_s = train_time
    losses = np.array([h[1:] for h in history], dtype=float)
    score = metrics.accuracy if test.is_classification else metrics.nmse
    if (losses.size and not np.all(np.isfinite(losses))) or not np.isfinite(score):
        raise NumericalFailure(f"non-finite loss or score (score={score})")
    return TrialResult(
        trial=trial,
        seed=seed,
        metrics=metrics,
        param_count=parameter_count(model),
        n_nodes=d.n,
        n_edges=d.num_edges,
        history=history,
        params=model.state_dict(),
    )


def _run_trial_safe(args) -> TrialResult:
    cfg, trial, seed = args
    try:
        return run_trial(cfg, trial, seed)
    except Exception as exc:
        msg = f"trial {trial} (seed {seed}): {exc}"
        try:
            wrapped = type(exc)(msg)
        except Exception:
            raise exc
        raise wrapped from exc


def describe(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return {}
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    return {
        "mean": float(v.mean()),
        "std": float(v.std()),  # population std, 0 for a single trial
        "median": float(med),
        "q25": float(q25),
        "q75": float(q75),
        "min": float(v.min()),
        "max": float(v.max()),
        "count": int(v.size),
    }


AGG_METRICS = ("nmse", "accuracy", "train_time_s", "infer_time_s", "wall_time_s", "param_count")


@dataclass
class ResultsBundle:
    config: dict
    seeds: list[int]
    trials: list[TrialResult]
    aggregate: dict[str, dict[str, float]]
    wall_time_s: float
    flags: list[str] = field(default_factory=list)
    output_dir: Path | None = None

    @property
    def rows(self) -> list[dict]:
        return [t.row() for t in self.trials]

    def metric(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def param_counts(self) -> list[int]:
        return [t.param_count for t in self.trials]

    def table(self) -> str:
        title = self.config.get("name") or f"{self.config['task']} / {self.config['model']['kind']}"
        lines = [f"{title}  ({len(self.trials)} trial{'s' if len(self.trials) != 1 else ''})"]
        lines.append(f"{'metric':<14}{'mean':>12}{'std':>12}{'median':>12}{'q25':>12}{'q75':>12}")
        for name, s in self.aggregate.items():
            lines.append(
                f"{name:<14}" + "".join(f"{s[k]:>12.4g}" for k in ("mean", "std", "median", "q25", "q75"))
            )
        for f in self.flags:
            lines.append(f"note: {f}")
        return "\n".join(lines) + "\n"


def aggregate_rows(rows: Sequence[Mapping]) -> dict[str, dict[str, float]]:
    out = {}
    for name in AGG_METRICS:
        s = describe([r[name] for r in rows])
        if s:
            out[name] = s
    return out


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParseError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ResultsBundle:
    """Run every trial, aggregate, and (if ``write`` and ``output_dir`` is set) save the bundle."""
    seeds = trial_seeds(cfg.seed, cfg.trials)
    jobs = [(cfg, t, s) for t, s in enumerate(seeds)]
    t0 = time.perf_counter()
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_safe, jobs))
    else:
        results = [_run_trial_safe(j) for j in jobs]
    for r in results:
        log.info("trial %d seed %d: %s", r.trial, r.seed, r.metrics)
    bundle = ResultsBundle(
        config=cfg.to_dict(),
        seeds=seeds,
        trials=results,
        aggregate=aggregate_rows([r.row() for r in results]),
        wall_time_s=time.perf_counter() - t0,
        flags=list(cfg.flags),
    )
    if write and cfg.output_dir:
        bundle.output_dir = write_bundle(bundle, cfg.output_dir)
    return bundle


# ---------- writing ----------


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def atomic_write_npz(path: str | Path, arrays: Mapping[str, np.ndarray]) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def csv_text(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r.get(k) is None else r.get(k) for k in columns})
    return buf.getvalue()


TRIAL_COLUMNS = (
    "trial", "seed", "nmse", "accuracy", "train_time_s", "infer_time_s",
    "wall_time_s", "param_count", "n_nodes", "n_edges",
)
STAT_COLUMNS = ("metric", "mean", "std", "median", "q25", "q75", "min", "max", "count")


def write_bundle(bundle: ResultsBundle, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = dict(bundle.config, seeds=bundle.seeds, optimizer="adam, decoupled weight decay")
    if bundle.flags:
        echo["flags"] = bundle.flags
    atomic_write_text(out / "config.yaml", yaml.safe_dump(echo, sort_keys=False))
    atomic_write_text(out / "trials.csv", csv_text(bundle.rows, TRIAL_COLUMNS))
    agg_rows = [dict(metric=k, **v) for k, v in bundle.aggregate.items()]
    atomic_write_text(out / "aggregate.csv", csv_text(agg_rows, STAT_COLUMNS))
    hist = [
        {"trial": t.trial, "epoch": e, "train_loss": tl, "val_loss": vl}
        for t in bundle.trials
        for e, tl, vl in t.history
    ]
    atomic_write_text(out / "history.csv", csv_text(hist, ("trial", "epoch", "train_loss", "val_loss")))
    snap = {f"trial{t.trial}/{k}": v for t in bundle.trials for k, v in t.params.items()}
    atomic_write_npz(out / "params.npz", snap)
    atomic_write_text(out / "summary.txt", bundle.table())
    return out


def read_trials_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k, v in r.items():
            r[k] = None if v == "" else float(v)
    return rows


# ---------- sweeps ----------

SWEEP_COLUMNS = ("param", "x", "model", "metric", "median", "q25", "q75", "mean", "std", "count")


def run_sweep(
    cfg: ExperimentConfig,
    param: str,
    values: Sequence,
    models: Sequence[str] | None = None,
    write: bool = True,
) -> list[dict]:
    """One run per ``(model, value)``; returns plot-ready rows ``(x, median, q25, q75)``."""
    base = cfg.to_dict()
    models = list(models) if models else [cfg.model.kind]
    metric = "accuracy" if cfg.task == "source_id" else "nmse"
    rows = []
    root = Path(cfg.output_dir) if (write and cfg.output_dir) else None
    for kind in models:
        for v in values:
            raw = copy.deepcopy(base)
            set_path(raw, "model.kind", kind)
            set_path(raw, param, v)
            raw["output_dir"] = str(root / f"{kind}" / f"{param}={v}") if root else None
            sub = config_from_dict(raw)
            bundle = run_experiment(sub, write=root is not None)
            s = bundle.aggregate[metric]
            rows.append(dict(param=param, x=v, model=kind, metric=metric, **{k: s[k] for k in SWEEP_COLUMNS[4:]}))
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        atomic_write_text(root / "sweep.csv", csv_text(rows, SWEEP_COLUMNS))
    return rows


# ---------- data export ----------


def export_dataset(cfg: ExperimentConfig, out_dir: str | Path, trial: int = 0) -> Path:
    """Write the graph and data of one trial as edge list + signal CSVs."""
    seed = trial_seeds(cfg.seed, trial + 1)[trial]
    seeds = TrialSeeds.derive(seed)
    d = build_graph(cfg.graph, seeds.graph)
    closure = transitive_closure(d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateTask)
        ds = build_dataset(cfg, d, closure, seeds)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(d, out / "graph.csv")
    for f in range(ds.inputs.shape[-1]):
        write_signals_csv(out / (f"inputs.csv" if f == 0 else f"inputs_f{f}.csv"), ds.inputs[..., f])
    if ds.is_classification:
        atomic_write_text(out / "labels.txt", "\n".join(str(int(v)) for v in ds.targets) + "\n")
        atomic_write_text(out / "candidates.txt", "\n".join(str(int(v)) for v in ds.candidates) + "\n")
    else:
        write_signals_csv(out / "targets.csv", ds.targets)
        if ds.clean_targets is not None:
            write_signals_csv(out / "clean_targets.csv", ds.clean_targets)
    if ds.target_mask is not None:
        atomic_write_text(out / "mask.txt", "\n".join(str(i) for i in np.flatnonzero(ds.target_mask)) + "\n")
    meta = {"task": cfg.task, "trial": trial, "seed": seed, "n": d.n, "edges": d.num_edges, "samples": len(ds)}
    atomic_write_text(out / "meta.yaml", yaml.safe_dump(meta, sort_keys=False))
    return out
