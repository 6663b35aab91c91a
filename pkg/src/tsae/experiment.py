"""Experiment plumbing shared by the CLI and the scripts: configuration, the
train/detect/eval pipeline, and parameter sweeps."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import baselines, evaluation, model as tsae_model, preprocessing as pp, synthetic
from .model import TrainConfig, TSAEModel

log = logging.getLogger(__name__)

MODEL_TYPES = ("tsae", "ae-w", "ae-i")
DATA_FORMATS = ("csv", "wadi")

# dataset presets: (down-sampling rate, window size, excluded signals)
PRESETS = {
    "wadi": dict(rate=5, window=10, exclude=["2B_AIT_002_PV"], data_format="wadi"),
    "swat": dict(rate=5, window=12, exclude=["AIT201", "P201"]),
    "synthetic": dict(rate=1, window=10, exclude=[]),
}

DEFAULT_RATES = [1, 5, 10, 20, 50]
DEFAULT_WINDOWS = [5, 10, 20, 50, 100]
# (AE1 hidden ratio, AE2 hidden ratio); the first pair is the default model
DEFAULT_NODES = [(0.5, 0.1), (0.25, 0.1), (0.75, 0.1), (0.5, 0.2), (0.5, 0.05), (0.25, 0.2)]


@dataclass
class SweepGrid:
    rates: list[int] = field(default_factory=lambda: list(DEFAULT_RATES))
    windows: list[int] = field(default_factory=lambda: list(DEFAULT_WINDOWS))
    nodes: list[tuple[float, float]] = field(default_factory=lambda: list(DEFAULT_NODES))
    n_repeats: int = 3

    def __post_init__(self):
        self.nodes = [tuple(float(v) for v in p) for p in self.nodes]
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")
        for name in ("rates", "windows"):
            if any(int(v) != v or v < 1 for v in getattr(self, name)):
                raise ValueError(f"sweep {name} must be positive integers")
        if any(a <= 0 or b <= 0 for a, b in self.nodes):
            raise ValueError("node ratios must be positive")


@dataclass
class ExperimentConfig:
    train_csv: str | None = None
    test_csv: str | None = None
    synthetic: dict | str | None = None  # SyntheticSpec fields, or "benchmark"
    data_format: str = "csv"
    exclude: list[str] = field(default_factory=list)
    rate: int = 5
    window: int = 10
    model: str = "tsae"
    mid_layers: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepGrid = field(default_factory=SweepGrid)
    out_dir: str = "runs"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        if isinstance(self.sweep, dict):
            self.sweep = SweepGrid(**self.sweep)
        # one seed drives everything; the training seed follows it
        self.train = replace(self.train, seed=int(self.seed))
        self.validate()

    def validate(self) -> None:
        has_csv = self.train_csv is not None
        if has_csv == (self.synthetic is not None):
            raise ValueError("configure exactly one data source: train_csv/test_csv or synthetic")
        if self.data_format not in DATA_FORMATS:
            raise ValueError(f"data_format must be one of {DATA_FORMATS}")
        if self.model not in MODEL_TYPES:
            raise ValueError(f"model must be one of {MODEL_TYPES}")
        if self.rate < 1 or self.window < 1:
            raise ValueError("rate and window must be positive")
        if self.mid_layers not in baselines.MID_LAYER_RATIOS:
            raise ValueError(f"mid_layers must be one of {sorted(baselines.MID_LAYER_RATIOS)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"]["val_ratio"] = list(self.train.val_ratio)
        d["sweep"]["nodes"] = [list(p) for p in self.sweep.nodes]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults <- preset <- config file (YAML or JSON) <- overrides."""
    d: dict = {}
    if preset:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        d = _merge(d, PRESETS[preset])
    if path:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config must be a mapping")
        d = _merge(d, loaded)
    if overrides:
        d = _merge(d, overrides)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**d)


# --- data ----------------------------------------------------------------------


def synthetic_spec(cfg: ExperimentConfig) -> synthetic.SyntheticSpec:
    if cfg.synthetic == "benchmark":
        return synthetic.benchmark_spec(cfg.seed)
    if isinstance(cfg.synthetic, dict):
        return synthetic.SyntheticSpec.from_dict(cfg.synthetic)
    raise ValueError("no synthetic spec configured")


def load_data(cfg: ExperimentConfig) -> tuple[pp.TimeSeriesMatrix, pp.TimeSeriesMatrix | None]:
    if cfg.synthetic is not None:
        return synthetic.generate(synthetic_spec(cfg))
    train = read_table(cfg.train_csv, cfg.data_format)
    test = read_table(cfg.test_csv, cfg.data_format) if cfg.test_csv else None
    return train, test


def read_table(path, data_format: str = "csv") -> pp.TimeSeriesMatrix:
    return pp.read_wadi_csv(path) if data_format == "wadi" else pp.read_csv(path)


def resolve_exclusions(columns, names) -> list[str]:
    """Map each requested name to a column: exact match first, else the unique
    column whose name ends with it (raw WADI headers carry long path prefixes)."""
    out = []
    for name in names:
        if name in columns:
            out.append(name)
            continue
        hits = [c for c in columns if c.endswith(name)]
        if len(hits) != 1:
            raise KeyError(f"excluded signal {name!r} matches {len(hits)} columns")
        out.append(hits[0])
    return out


@dataclass
class Pipeline:
    """Everything needed to turn a raw matrix into model windows."""

    exclude: list[str]
    scaling: pp.ScalingParams
    rate: int
    window: int
    data_format: str = "csv"

    def transform(self, data: pp.TimeSeriesMatrix) -> pp.WindowSeries:
        # keep exactly the training signals, in training order
        data = pp.select_columns(data, self.scaling.column_names)
        data = pp.apply_minmax(self.scaling, data)
        data = pp.decimate(data, self.rate)
        return pp.make_windows(data, self.window)

    def to_dict(self) -> dict:
        return {"exclude": list(self.exclude), "rate": self.rate, "window": self.window,
                "data_format": self.data_format}


def fit_pipeline(train: pp.TimeSeriesMatrix, exclude, rate: int, window: int,
                 data_format: str = "csv") -> tuple[Pipeline, pp.WindowSeries]:
    names = resolve_exclusions(train.column_names, exclude)
    kept = pp.exclude_signals(train, names)
    pipe = Pipeline(names, pp.fit_minmax(kept), int(rate), int(window), data_format)
    return pipe, pipe.transform(train)


# --- models --------------------------------------------------------------------


def train_model(cfg: ExperimentConfig, train: pp.TimeSeriesMatrix, train_cfg: TrainConfig | None = None,
                rate: int | None = None, window: int | None = None):
    """Preprocess ``train`` and fit the configured model type."""
    tcfg = train_cfg or cfg.train
    pipe, windows = fit_pipeline(train, cfg.exclude, rate or cfg.rate, window or cfg.window, cfg.data_format)
    if cfg.model == "tsae":
        mdl = tsae_model.train_tsae(windows, tcfg, scaling=pipe.scaling)
    else:
        mdl = baselines.train_ae(windows, tcfg, cfg.mid_layers, scaling=pipe.scaling)
        mdl.meta["score_unit"] = "window" if cfg.model == "ae-w" else "instant"
    mdl.meta["pipeline"] = pipe.to_dict()
    mdl.meta["model_type"] = cfg.model
    return mdl


def save_any(mdl, path) -> None:
    if isinstance(mdl, TSAEModel):
        tsae_model.save_model(mdl, path)
    else:
        baselines.save_baseline(mdl, path)


def load_any(path):
    header, _ = tsae_model.read_container(path)
    if header.get("kind") == "tsae":
        return tsae_model.load_model(path)
    return baselines.load_baseline(path)


def pipeline_of(mdl) -> Pipeline:
    p = mdl.meta.get("pipeline")
    if p is None or mdl.scaling is None:
        raise ValueError("model file carries no preprocessing parameters")
    return Pipeline(list(p["exclude"]), mdl.scaling, int(p["rate"]), int(p["window"]), p.get("data_format", "csv"))


def score_windows(mdl, windows: pp.WindowSeries) -> np.ndarray:
    if isinstance(mdl, TSAEModel):
        return tsae_model.anomaly_scores(mdl, windows)
    if mdl.meta.get("score_unit", "instant") == "window":
        return baselines.scores_window(mdl, windows)
    return baselines.scores_instant(mdl, windows)


@dataclass
class Detection:
    t: np.ndarray  # window end index in (decimated) test coordinates
    scores: np.ndarray
    truth: np.ndarray | None

    def labels(self, threshold: float) -> np.ndarray:
        return tsae_model.detect(self.scores, threshold=threshold)


def score_test(mdl, test: pp.TimeSeriesMatrix) -> Detection:
    """Apply the model's stored preprocessing to ``test`` and score every window."""
    pipe = pipeline_of(mdl)
    missing = sorted(set(mdl.scaling.column_names) - set(test.column_names))
    if missing:
        raise ValueError(f"model expects {mdl.m} signals; test data lacks {missing[:5]}")
    windows = pipe.transform(test)
    return Detection(windows.ends, score_windows(mdl, windows), windows.window_labels())


def write_scores(det: Detection, threshold: float, path) -> None:
    labels = det.labels(threshold)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "score", "label"])
        for t, s, y in zip(det.t, det.scores, labels):
            w.writerow([int(t), repr(float(s)), int(y)])


def write_truth(det: Detection, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "label"])
        for t, y in zip(det.t, det.truth):
            w.writerow([int(t), int(y)])


def read_scores(path) -> tuple[np.ndarray, np.ndarray]:
    t, s = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t.append(int(row["t"]))
            s.append(float(row["score"]))
    return np.array(t), np.array(s)


def read_truth(path, t: np.ndarray) -> np.ndarray:
    """Truth labels aligned to the score rows ``t``; accepts a ``t,label`` file."""
    got = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            got[int(row["t"])] = int(row["label"])
    missing = [int(x) for x in t if int(x) not in got]
    if missing:
        raise ValueError(f"truth file has no label for t={missing[0]}")
    return np.array([got[int(x)] for x in t], dtype=np.int8)


def evaluate_scores(scores, truth, threshold="sweep") -> evaluation.EvalReport:
    if threshold == "sweep":
        return evaluation.best_f1_sweep(scores, truth)[1]
    return evaluation.evaluate(scores, truth, float(threshold))


def write_train_log(mdl, path) -> None:
    """epoch-wise losses as CSV: stage, epoch, train_loss, val_loss."""
    hists = []
    if isinstance(mdl, TSAEModel):
        hists = [("ae1", mdl.meta.get("ae1_history")), ("ae2", mdl.meta.get("ae2_history"))]
    else:
        hists = [("ae", mdl.meta.get("history"))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "epoch", "train_loss", "val_loss"])
        for stage, h in hists:
            if not h:
                continue
            val = h.get("val_loss") or []
            for i, tl in enumerate(h["train_loss"]):
                w.writerow([stage, i + 1, repr(tl), repr(val[i]) if i < len(val) else ""])


# --- one run and sweeps ----------------------------------------------------------


def run_once(cfg: ExperimentConfig, seed: int, train=None, test=None, **grid_point) -> evaluation.EvalReport:
    """Train with ``seed`` and return the best-F1 point-adjusted report on the test set.

    ``grid_point`` may set ``rate``, ``window`` or ``nodes=(a, b)``.
    """
    if train is None:
        train, test = load_data(cfg)
    if test is None or test.labels is None:
        raise ValueError("evaluation needs a labelled test set")
    tcfg = replace(cfg.train, seed=seed)
    if "nodes" in grid_point:
        a, b = grid_point["nodes"]
        tcfg = replace(tcfg, ae1_ratios=[a], ae2_ratio=b)
    mdl = train_model(cfg, train, tcfg, rate=grid_point.get("rate"), window=grid_point.get("window"))
    det = score_test(mdl, test)
    return evaluate_scores(det.scores, det.truth)


SWEEP_PARAMS = ("rate", "window", "nodes")
SWEEP_COLUMNS = ["param", "value", "seed", "precision", "recall", "f1"]


def _shown(param, value) -> str:
    return f"{value[0]}:{value[1]}" if param == "nodes" else str(value)


def sweep_runs(cfg: ExperimentConfig, params=SWEEP_PARAMS, progress=None) -> list[dict]:
    """Train and evaluate every (parameter, value, seed); one row each.

    Seeds are ``cfg.seed + r`` for r < n_repeats, the same for every grid point,
    so a grid point's rows do not depend on which other points are swept.
    """
    train, test = load_data(cfg)
    grids = {"rate": cfg.sweep.rates, "window": cfg.sweep.windows, "nodes": cfg.sweep.nodes}
    rows = []
    for param in params:
        if param not in grids:
            raise ValueError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")
        values = grids[param]
        if not values:
            raise ValueError(f"sweep grid for {param!r} is empty")
        for value in values:
            for r in range(cfg.sweep.n_repeats):
                seed = cfg.seed + r
                rep = run_once(cfg, seed, train, test, **{param: value})
                row = dict(param=param, value=_shown(param, value), seed=str(seed),
                           precision=rep.precision, recall=rep.recall, f1=rep.f1)
                rows.append(row)
                if progress:
                    progress(row)
    return rows


def average_runs(rows: list[dict]) -> list[dict]:
    """Mean P/R/F1 per grid point; ``seed`` lists the seeds joined by ';'."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["param"], r["value"]), []).append(r)
    out = []
    for (param, value), rs in groups.items():
        out.append(dict(
            param=param, value=value, seed=";".join(r["seed"] for r in rs),
            precision=float(np.mean([r["precision"] for r in rs])),
            recall=float(np.mean([r["recall"] for r in rs])),
            f1=float(np.mean([r["f1"] for r in rs])),
        ))
    return out


def write_sweep(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({**r, **{k: repr(float(r[k])) for k in ("precision", "recall", "f1")}})
