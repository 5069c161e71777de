"""Experiment harness: grids, cross-validation, model selection, ablations and sweeps.

A run is one ``(method, grid point, fold, seed)`` training job.  Every job
is evaluated on its validation and test splits at every ``eval_every``-th
epoch.  For each replicate ``(fold, seed)`` and each selection metric, the
``(lr, weight decay, method hyperparameter, epoch)`` combination with the
best validation value is chosen and its test value reported.

In the holdout protocol used for the synthetic sets there is no
validation split; the final epoch is used and the grid point is chosen on
the held-out half.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.special import betainc

from . import datasets as D
from .aggregate import GarConfig, all_masks, SUBLOSS_NAMES
from .metrics import HIGHER_IS_BETTER, METRIC_NAMES, evaluate
from .network import NetworkSpec, ParameterStore, init, predict
from .optim import TrainConfig, TrainingDiverged, TrainingTrace, train

log = logging.getLogger(__name__)

SELECTION_METRICS = ("mae", "rmse", "pearson", "spearman")
METHODS = ("mae", "mse", "huber", "mae_pearson", "gar")
SYNTHETIC_NAMES = ("sine", "sqsine", "squared_sine")

# protocol defaults for the tabular benchmarks
_TABULAR_DEFAULTS: dict[str, Any] = dict(
    optimizer="sgd_momentum",
    epochs=100,
    batch_size=256,
    lr_decay_epochs=(50, 75),
    lrs=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5),
    weight_decays=(1e-3, 1e-4, 1e-5),
    alphas=(0.1, 1.0, 10.0),
    methods=("mae", "mse", "huber", "gar"),
    seeds=(0,),
)

# protocol defaults for the synthetic sets
_SYNTHETIC_DEFAULTS: dict[str, Any] = dict(
    optimizer="adam",
    epochs=300,
    batch_size=128,
    lr_decay_epochs=(100, 200),
    lrs=(1e-1, 1e-2, 1e-3, 1e-4),
    weight_decays=(1e-3, 1e-4, 1e-5, 0.0),
    alphas=(0.5,),
    methods=("mae", "mse", "huber", "mae_pearson", "gar"),
    seeds=(1, 2, 3, 4, 5),
    hidden_dims=(100, 100, 100, 100, 100),
    protocol="holdout",
)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "concrete"
    data_path: str | None = None
    data_dir: str = "data"
    targets: tuple[str, ...] = ()
    delimiter: str = ","
    drop_columns: tuple[str, ...] = ()
    hidden_dims: tuple[int, ...] | None = None
    protocol: str = "cv"
    test_fraction: float = 0.2
    k_folds: int = 5
    folds: tuple[int, ...] | None = None
    split_seed: int = 123
    optimizer: str = "sgd_momentum"
    momentum: float = 0.9
    epochs: int = 100
    batch_size: int = 256
    lr_decay_epochs: tuple[int, ...] = (50, 75)
    lr_decay_factor: float = 0.1
    lrs: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
    weight_decays: tuple[float, ...] = (1e-3, 1e-4, 1e-5)
    alphas: tuple[float, ...] = (0.1, 1.0, 10.0)
    huber_deltas: tuple[float, ...] = (0.25, 1.0, 4.0)
    methods: tuple[str, ...] = ("mae", "mse", "huber", "gar")
    baseline: str = "mae"
    gar_mask: tuple[bool, bool, bool] = (True, True, True)
    seeds: tuple[int, ...] = (0,)
    standardize: bool = False
    standardize_targets: bool = False
    selection_metric: str = "all"
    eval_every: int = 1
    workers: int = 1
    save_models: bool = False

    def __post_init__(self):
        for name in ("targets", "drop_columns", "lr_decay_epochs", "lrs", "weight_decays", "alphas", "huber_deltas", "methods", "seeds", "gar_mask"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.hidden_dims is not None:
            object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.folds is not None:
            object.__setattr__(self, "folds", tuple(int(f) for f in self.folds))
        self.validate()

    def validate(self) -> None:
        for name in ("lrs", "weight_decays", "seeds", "methods"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        for m in self.methods:
            if _base_method(m) not in METHODS:
                raise ValueError(f"unknown method {m!r}")
            if not any(_method_mask(m, self.gar_mask)):
                raise ValueError(f"method {m!r} enables no sub-loss")
        if "gar" in self.methods and not self.alphas:
            raise ValueError("alphas must be non-empty when gar is run")
        if "huber" in self.methods and not self.huber_deltas:
            raise ValueError("huber_deltas must be non-empty when huber is run")
        if self.protocol not in ("cv", "holdout"):
            raise ValueError(f"protocol must be 'cv' or 'holdout', got {self.protocol!r}")
        if self.selection_metric not in (*SELECTION_METRICS, "all"):
            raise ValueError(f"unknown selection metric {self.selection_metric!r}")
        if self.eval_every < 1 or self.workers < 1:
            raise ValueError("eval_every and workers must be >= 1")
        if any(lr <= 0 for lr in self.lrs) or any(wd < 0 for wd in self.weight_decays):
            raise ValueError("learning rates must be positive and weight decays non-negative")
        if any(a <= 0 for a in self.alphas) or any(d <= 0 for d in self.huber_deltas):
            raise ValueError("alphas and huber deltas must be positive")
        if not any(self.gar_mask):
            raise ValueError("gar_mask must enable at least one sub-loss")
        if self.folds is not None and any(not 0 <= f < self.k_folds for f in self.folds):
            raise ValueError("fold indices out of range")
        # constructing these validates the remaining fields
        D.SplitPlan(self.test_fraction, self.k_folds, self.split_seed)
        self.train_config(self.lrs[0], self.weight_decays[0], "mae", None, self.seeds[0])

    @property
    def is_synthetic(self) -> bool:
        return self.dataset in SYNTHETIC_NAMES

    @property
    def selection_metrics(self) -> tuple[str, ...]:
        return SELECTION_METRICS if self.selection_metric == "all" else (self.selection_metric,)

    def train_config(self, lr: float, wd: float, method: str, hp, seed: int) -> TrainConfig:
        base = _base_method(method)
        mask = _method_mask(method, self.gar_mask)
        return TrainConfig(
            optimizer=self.optimizer,
            lr0=lr,
            momentum=self.momentum,
            weight_decay=wd,
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr_decay_epochs=self.lr_decay_epochs,
            lr_decay_factor=self.lr_decay_factor,
            seed=seed,
            loss_kind=base,
            huber_delta=hp if base == "huber" else 1.0,
            gar=GarConfig(alpha=hp if base == "gar" else 1.0, enabled=mask),
        )

    def hyperparameters(self, method: str) -> tuple:
        base = _base_method(method)
        if base == "gar":
            return self.alphas
        if base == "huber":
            return self.huber_deltas
        return (None,)

    def to_json(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        base = dict(_SYNTHETIC_DEFAULTS if obj.get("dataset") in SYNTHETIC_NAMES else _TABULAR_DEFAULTS)
        base.update(obj)
        return cls(**base)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if not isinstance(obj, dict):
            raise ValueError("config must be a JSON object")
        return cls.from_dict(obj)


def _base_method(method: str) -> str:
    return method.split(":", 1)[0]


def _method_mask(method: str, default: tuple[bool, ...]) -> tuple[bool, ...]:
    """``gar:mae+diff`` style labels override the configured mask."""
    if ":" not in method:
        return tuple(default)
    parts = method.split(":", 1)[1].split("+")
    if any(p not in SUBLOSS_NAMES for p in parts):
        raise ValueError(f"bad sub-loss list in {method!r}")
    return tuple(n in parts for n in SUBLOSS_NAMES)


def mask_method(mask: Sequence[bool]) -> str:
    return "gar:" + "+".join(n for n, on in zip(SUBLOSS_NAMES, mask) if on)


def default_hidden_dims(n_features: int) -> tuple[int, ...]:
    return (16, 32, 16, 8) if n_features <= 16 else (128, 256, 128, 64)


def load_dataset(cfg: ExperimentConfig) -> D.Dataset:
    if cfg.dataset in D.SYNTHETIC:
        return D.SYNTHETIC[cfg.dataset]()
    if cfg.dataset == "csv":
        if not cfg.data_path or not cfg.targets:
            raise ValueError("dataset 'csv' needs data_path and targets")
        return D.load_csv(cfg.data_path, cfg.targets, cfg.delimiter, cfg.drop_columns)
    return D.load_preset(cfg.dataset, cfg.data_dir, cfg.data_path)


@dataclass(frozen=True)
class GridPoint:
    index: int
    lr: float
    weight_decay: float
    hp: float | None


def grid_points(cfg: ExperimentConfig, method: str) -> list[GridPoint]:
    out = []
    for lr in cfg.lrs:
        for wd in cfg.weight_decays:
            for hp in cfg.hyperparameters(method):
                out.append(GridPoint(len(out), lr, wd, hp))
    return out


@dataclass(frozen=True)
class Task:
    method: str
    point: GridPoint
    fold: int
    seed: int


@dataclass
class RunResult:
    task: Task
    epochs: list[int]
    val: dict[str, list[float]]
    test: dict[str, list[float]]
    diverged_at: int | None
    trace: TrainingTrace
    curve: np.ndarray | None = None
    params: ParameterStore | None = None


@dataclass
class _Split:
    train: D.Dataset
    val: D.Dataset | None
    test: D.Dataset
    val_truth: np.ndarray | None
    test_truth: np.ndarray
    stats: D.StandardizeStats | None
    curve_x: np.ndarray | None


def _prepare_splits(cfg: ExperimentConfig, data: D.Dataset) -> list[_Split]:
    if cfg.protocol == "holdout":
        train_, test = D.holdout_half(data, cfg.split_seed)
        raw = [(train_, None, test)]
        curve_x = data.features
    else:
        test, folds = D.split_and_fold(data, D.SplitPlan(cfg.test_fraction, cfg.k_folds, cfg.split_seed))
        raw = [(tr, va, test) for tr, va in folds]
        curve_x = None
    out = []
    for tr, va, te in raw:
        stats = None
        if cfg.standardize:
            others = [d for d in (va, te) if d is not None]
            (tr_s, *rest), stats = D.standardize(tr, others, cfg.standardize_targets)
            va_s = rest[0] if va is not None else None
            te_s = rest[-1]
        else:
            tr_s, va_s, te_s = tr, va, te
        out.append(
            _Split(tr_s, va_s, te_s, None if va is None else va.targets, te.targets, stats, curve_x)
        )
    return out


def _metrics_or_nan(pred: np.ndarray, truth: np.ndarray) -> dict[str, float]:
    if not np.all(np.isfinite(pred)):
        return {m: float("nan") for m in METRIC_NAMES}
    rep = evaluate(pred, truth)
    return {m: rep.average(m) for m in METRIC_NAMES}


def _predict(params: ParameterStore, split: _Split, x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        p = predict(params, x)
    return p if split.stats is None else split.stats.invert_targets(p)


def run_task(cfg: ExperimentConfig, split: _Split, task: Task) -> RunResult:
    """Train one job and evaluate it along the way."""
    d = split.train
    spec = NetworkSpec(d.n_features, cfg.hidden_dims or default_hidden_dims(d.n_features), d.n_targets)
    tcfg = cfg.train_config(task.point.lr, task.point.weight_decay, task.method, task.point.hp, task.seed)
    params = init(spec, task.seed)
    epochs: list[int] = []
    val = {m: [] for m in METRIC_NAMES}
    test = {m: [] for m in METRIC_NAMES}
    last = cfg.epochs - 1

    def record(epoch: int, p: ParameterStore | None) -> None:
        epochs.append(epoch)
        for store, ds, truth in ((val, split.val, split.val_truth), (test, split.test, split.test_truth)):
            if ds is None:
                continue
            vals = _metrics_or_nan(_predict(p, split, ds.features), truth) if p is not None else dict.fromkeys(METRIC_NAMES, float("nan"))
            for m in METRIC_NAMES:
                store[m].append(vals[m])

    def on_epoch_end(epoch: int, p: ParameterStore) -> None:
        if (epoch + 1) % cfg.eval_every == 0 or epoch == last:
            record(epoch, p)

    diverged = None
    trace = TrainingTrace()
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            params, trace = train(d.features, d.targets, spec, tcfg, params, on_epoch_end)
    except TrainingDiverged as exc:
        diverged = exc.epoch
        log.info("%s lr=%g wd=%g hp=%s fold=%d seed=%d diverged at epoch %d", task.method, task.point.lr, task.point.weight_decay, task.point.hp, task.fold, task.seed, exc.epoch)
        done = epochs[-1] if epochs else -1
        for e in range(done + 1, cfg.epochs):
            if (e + 1) % cfg.eval_every == 0 or e == last:
                record(e, None)
    curve = None
    if split.curve_x is not None:
        curve = _predict(params, split, split.curve_x) if diverged is None else np.full((split.curve_x.shape[0], d.n_targets), np.nan)
    return RunResult(task, epochs, val, test, diverged, trace, curve, params if cfg.save_models else None)


def _run_task_star(args):
    return run_task(*args)


@dataclass(frozen=True)
class Selection:
    method: str
    fold: int
    seed: int
    metric: str
    grid_index: int
    lr: float
    weight_decay: float
    hp: float | None
    epoch: int
    val_value: float
    test_value: float


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    pvalue: float
    degenerate: bool


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired Student t-test through the regularized incomplete beta function.

    Identical samples give ``p = 1``.  A non-zero but constant difference
    has no variance estimate; it is flagged ``degenerate`` with ``p = NaN``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    if not np.all(np.isfinite(d)):
        return TTestResult(float("nan"), float("nan"), True)
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, False)
        return TTestResult(math.copysign(math.inf, mean), float("nan"), True)
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(t, min(max(p, 0.0), 1.0), False)


@dataclass
class MethodSummary:
    method: str
    metric: str
    values: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))


@dataclass(frozen=True)
class Comparison:
    method: str
    baseline: str
    metric: str
    delta: float
    relative_gain: float
    ttest: TTestResult


@dataclass
class RunReport:
    config: ExperimentConfig
    methods: tuple[str, ...]
    results: list[RunResult]
    selections: list[Selection]
    summaries: list[MethodSummary]
    comparisons: list[Comparison]
    curve_x: np.ndarray | None = None
    curve_truth: np.ndarray | None = None
    sensitivity: list[dict] = field(default_factory=list)
    stats: dict[int, D.StandardizeStats] = field(default_factory=dict)
    ablation_ranks: dict[str, float] = field(default_factory=dict)

    def summary(self, method: str, metric: str) -> MethodSummary:
        for s in self.summaries:
            if s.method == method and s.metric == metric:
                return s
        raise KeyError((method, metric))

    def comparison(self, method: str, metric: str) -> Comparison:
        for c in self.comparisons:
            if c.method == method and c.metric == metric:
                return c
        raise KeyError((method, metric))

    def selected(self, method: str, metric: str) -> list[Selection]:
        return [s for s in self.selections if s.method == method and s.metric == metric]


def _select(cfg: ExperimentConfig, results: list[RunResult], method: str, fold: int, seed: int, metric: str) -> Selection:
    """Best (grid point, epoch) on validation; holdout runs use the final epoch on test."""
    sign = -1.0 if HIGHER_IS_BETTER[metric] else 1.0
    best = None
    for r in results:
        t = r.task
        if t.method != method or t.fold != fold or t.seed != seed:
            continue
        has_val = bool(r.val[metric])
        source = r.val[metric] if has_val else r.test[metric]
        candidates = range(len(r.epochs)) if has_val else [len(r.epochs) - 1]
        for k in candidates:
            v = source[k]
            if not math.isfinite(v):
                continue
            key = (sign * v, t.point.index, r.epochs[k])
            if best is None or key < best[0]:
                best = (key, r, k)
    if best is None:
        nan = float("nan")
        return Selection(method, fold, seed, metric, -1, nan, nan, None, -1, nan, nan)
    _, r, k = best
    p = r.task.point
    val_value = r.val[metric][k] if r.val[metric] else r.test[metric][k]
    return Selection(method, fold, seed, metric, p.index, p.lr, p.weight_decay, p.hp, r.epochs[k], val_value, r.test[metric][k])


def _assemble(cfg: ExperimentConfig, methods: Sequence[str], results: list[RunResult], splits: list[_Split], fold_ids: Sequence[int]) -> RunReport:
    selections = []
    for method in methods:
        for fold in fold_ids:
            for seed in cfg.seeds:
                for metric in cfg.selection_metrics:
                    selections.append(_select(cfg, results, method, fold, seed, metric))
    summaries = []
    for method in methods:
        for metric in cfg.selection_metrics:
            vals = [s.test_value for s in selections if s.method == method and s.metric == metric]
            summaries.append(MethodSummary(method, metric, vals))
    comparisons = []
    base = cfg.baseline
    if base in methods:
        for method in methods:
            if method == base:
                continue
            for metric in cfg.selection_metrics:
                a = [s.test_value for s in selections if s.method == method and s.metric == metric]
                b = [s.test_value for s in selections if s.method == base and s.metric == metric]
                delta = float(np.mean(a) - np.mean(b))
                denom = abs(float(np.mean(b)))
                rel = delta / denom if denom > 0 else float("nan")
                tt = paired_ttest(a, b) if len(a) >= 2 else TTestResult(float("nan"), float("nan"), True)
                comparisons.append(Comparison(method, base, metric, delta, rel, tt))
    curve_x = splits[0].curve_x
    curve_truth = None
    if curve_x is not None:
        full = load_dataset(cfg)
        curve_truth = full.targets
    stats = {f: splits[f].stats for f in fold_ids if splits[f].stats is not None}
    return RunReport(cfg, tuple(methods), results, selections, summaries, comparisons, curve_x, curve_truth, stats=stats)


def _execute(cfg: ExperimentConfig, methods: Sequence[str]) -> RunReport:
    data = load_dataset(cfg)
    splits = _prepare_splits(cfg, data)
    fold_ids = list(cfg.folds) if (cfg.folds is not None and cfg.protocol == "cv") else list(range(len(splits)))
    jobs = []
    for method in methods:
        for point in grid_points(cfg, method):
            for fold in fold_ids:
                for seed in cfg.seeds:
                    jobs.append((cfg, splits[fold], Task(method, point, fold, seed)))
    log.info("running %d training jobs", len(jobs))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_task_star, jobs, chunksize=1))
    else:
        results = [run_task(*j) for j in jobs]
    return _assemble(cfg, methods, results, splits, fold_ids)


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Every configured method over the grid, folds and seeds."""
    return _execute(cfg, cfg.methods)


def run_ablation(cfg: ExperimentConfig) -> RunReport:
    """GAR with each of the seven non-empty sub-loss masks.

    ``ablation_ranks`` holds each variant's rank among the seven, averaged
    over replicates and the selection metrics (1 is best).
    """
    methods = [mask_method(m) for m in all_masks()]
    rep = _execute(replace(cfg, baseline=mask_method((True, False, False))), methods)
    rep.ablation_ranks = mean_ranks(rep)
    return rep


def mean_ranks(rep: RunReport) -> dict[str, float]:
    """Average rank of every method over (replicate, metric); ties share the mean rank."""
    from .metrics import rank_average_ties

    totals = {m: [] for m in rep.methods}
    replicates = sorted({(s.fold, s.seed) for s in rep.selections})
    for metric in rep.config.selection_metrics:
        sign = -1.0 if HIGHER_IS_BETTER[metric] else 1.0
        for fold, seed in replicates:
            vals = []
            for m in rep.methods:
                s = [x for x in rep.selections if x.method == m and x.metric == metric and x.fold == fold and x.seed == seed][0]
                v = s.test_value
                vals.append(sign * v if math.isfinite(v) else math.inf)
            ranks = rank_average_ties(vals)
            for m, r in zip(rep.methods, ranks):
                totals[m].append(float(r))
    return {m: float(np.mean(v)) for m, v in totals.items()}


def run_sensitivity(cfg: ExperimentConfig, alphas: Sequence[float], batch_sizes: Sequence[int]) -> RunReport:
    """GAR at each fixed ``(alpha, batch size)``; one row per (alpha, batch size, replicate)."""
    if not alphas or not batch_sizes:
        raise ValueError("alphas and batch_sizes must be non-empty")
    rows = []
    reports = []
    for b in batch_sizes:
        for a in alphas:
            sub = replace(cfg, methods=("gar",), alphas=(float(a),), batch_size=int(b))
            rep = run_experiment(sub)
            reports.append(rep)
            replicates = sorted({(s.fold, s.seed) for s in rep.selections})
            for fold, seed in replicates:
                row = {"alpha": float(a), "batch_size": int(b), "fold": fold, "seed": seed}
                for metric in cfg.selection_metrics:
                    s = [x for x in rep.selections if x.metric == metric and x.fold == fold and x.seed == seed][0]
                    row[metric] = s.test_value
                rows.append(row)
    merged = RunReport(
        cfg,
        ("gar",),
        [r for rep in reports for r in rep.results],
        [s for rep in reports for s in rep.selections],
        [],
        [],
    )
    merged.sensitivity = rows
    return merged


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def write_report(rep: RunReport, out_dir) -> list[Path]:
    """CSV and JSON files describing the run; contents depend only on config and seeds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "config.json"
    p.write_text(json.dumps(_json_safe(rep.config.to_json()), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(p)

    p = out / "evaluations.csv"
    rows = []
    for r in rep.results:
        t = r.task
        for k, epoch in enumerate(r.epochs):
            row = [t.method, t.point.index, t.point.lr, t.point.weight_decay, t.point.hp, t.fold, t.seed, epoch]
            for store in (r.val, r.test):
                row += [store[m][k] if store[m] else None for m in METRIC_NAMES]
            rows.append(row)
    header = ["method", "grid_index", "lr", "weight_decay", "hp", "fold", "seed", "epoch"]
    header += [f"val_{m}" for m in METRIC_NAMES] + [f"test_{m}" for m in METRIC_NAMES]
    _write_rows(p, header, rows)
    written.append(p)

    p = out / "selection.csv"
    _write_rows(
        p,
        ["method", "fold", "seed", "metric", "grid_index", "lr", "weight_decay", "hp", "epoch", "val_value", "test_value"],
        [[s.method, s.fold, s.seed, s.metric, s.grid_index, s.lr, s.weight_decay, s.hp, s.epoch, s.val_value, s.test_value] for s in rep.selections],
    )
    written.append(p)

    if rep.summaries:
        p = out / "summary.csv"
        _write_rows(p, ["method", "metric", "mean", "std", "n"], [[s.method, s.metric, s.mean, s.std, len(s.values)] for s in rep.summaries])
        written.append(p)
    if rep.comparisons:
        p = out / "comparison.csv"
        _write_rows(
            p,
            ["method", "baseline", "metric", "delta", "relative_gain", "t_statistic", "p_value", "degenerate"],
            [[c.method, c.baseline, c.metric, c.delta, c.relative_gain, c.ttest.statistic, c.ttest.pvalue, c.ttest.degenerate] for c in rep.comparisons],
        )
        written.append(p)
    if rep.sensitivity:
        p = out / "sensitivity.csv"
        keys = ["alpha", "batch_size", "fold", "seed", *rep.config.selection_metrics]
        _write_rows(p, keys, [[row[k] for k in keys] for row in rep.sensitivity])
        written.append(p)
    if rep.ablation_ranks:
        p = out / "ablation_ranks.csv"
        _write_rows(p, ["method", "mean_rank"], sorted(rep.ablation_ranks.items(), key=lambda kv: rep.methods.index(kv[0])))
        written.append(p)

    doc = {
        "summary": [{"method": s.method, "metric": s.metric, "mean": s.mean, "std": s.std, "values": s.values} for s in rep.summaries],
        "comparison": [
            {
                "method": c.method,
                "baseline": c.baseline,
                "metric": c.metric,
                "delta": c.delta,
                "relative_gain": c.relative_gain,
                "t_statistic": c.ttest.statistic,
                "p_value": c.ttest.pvalue,
                "degenerate": c.ttest.degenerate,
            }
            for c in rep.comparisons
        ],
        "diverged_runs": sum(1 for r in rep.results if r.diverged_at is not None),
        "skipped_batches": sum(r.trace.skipped_batches for r in rep.results),
    }
    if rep.ablation_ranks:
        doc["ablation_mean_rank"] = rep.ablation_ranks
    p = out / "report.json"
    p.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(p)

    if rep.config.save_models:
        mdir = out / "models"
        mdir.mkdir(exist_ok=True)
        for r in rep.results:
            if r.params is None:
                continue
            t = r.task
            name = f"{t.method.replace(':', '-').replace('+', '_')}_g{t.point.index}_f{t.fold}_s{t.seed}.garm"
            r.params.save(mdir / name)
            written.append(mdir / name)
        for fold, st in sorted(rep.stats.items()):
            p = mdir / f"stats_f{fold}.json"
            p.write_text(json.dumps(st.to_json(), sort_keys=True) + "\n", encoding="utf-8")
            written.append(p)
    return written


PLOT_KINDS = ("prediction_curve", "sensitivity_box", "trace")


def _reference_selection(rep: RunReport, method: str) -> list[Selection]:
    metric = "pearson" if "pearson" in rep.config.selection_metrics else rep.config.selection_metrics[0]
    return rep.selected(method, metric)


def emit_plot_data(rep: RunReport, kind: str, out_dir) -> list[Path]:
    """Plot-ready CSVs.

    * ``prediction_curve``: ``x, y_true, y_pred_mean, y_pred_std`` over the
      whole synthetic grid, one file per method, predictions averaged over
      seeds at the grid point chosen by Pearson.
    * ``sensitivity_box``: one row per (alpha, batch size, replicate).
    * ``trace``: per-epoch training trace of the chosen run of each method
      on the first replicate.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if kind == "prediction_curve":
        if rep.curve_x is None or not any(r.curve is not None for r in rep.results):
            raise ValueError("report has no prediction-curve series (holdout protocol only)")
        for method in rep.methods:
            sels = _reference_selection(rep, method)
            preds = []
            for s in sels:
                for r in rep.results:
                    t = r.task
                    if t.method == method and t.fold == s.fold and t.seed == s.seed and t.point.index == s.grid_index:
                        preds.append(r.curve[:, 0])
            if not preds:
                continue
            stack = np.vstack(preds)
            rows = zip(rep.curve_x[:, 0], rep.curve_truth[:, 0], stack.mean(axis=0), stack.std(axis=0))
            p = out / f"curve_{_slug(method)}.csv"
            _write_rows(p, ["x", "y_true", "y_pred_mean", "y_pred_std"], [[float(v) for v in row] for row in rows])
            written.append(p)
    elif kind == "sensitivity_box":
        if not rep.sensitivity:
            raise ValueError("report has no sensitivity series")
        p = out / "sensitivity_box.csv"
        keys = ["alpha", "batch_size", "fold", "seed", *rep.config.selection_metrics]
        _write_rows(p, keys, [[row[k] for k in keys] for row in rep.sensitivity])
        written.append(p)
    else:
        for method in rep.methods:
            sels = _reference_selection(rep, method)
            if not sels:
                raise ValueError(f"no trace for {method}")
            s = sels[0]
            for r in rep.results:
                t = r.task
                if t.method == method and t.fold == s.fold and t.seed == s.seed and t.point.index == s.grid_index:
                    p = out / f"trace_{_slug(method)}.csv"
                    r.trace.to_csv(p)
                    written.append(p)
                    break
    return written


def _slug(method: str) -> str:
    return method.replace(":", "-").replace("+", "_")
