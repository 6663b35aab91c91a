"""Data pipeline: CSV ingestion, signal exclusion, shared-factor min-max scaling,
anti-aliased decimation, sliding windows and the train/validation split."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import signal

LABEL_COLUMN = "label"
TIMESTAMP_COLUMNS = ("timestamp", "time", "datetime", "date")
_LABEL_WORDS = {"normal": 0, "attack": 1, "a ttack": 1}


@dataclass
class TimeSeriesMatrix:
    values: np.ndarray
    column_names: list[str]
    labels: np.ndarray | None = None
    timestamps: np.ndarray | None = None
    sample_period: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a T x m matrix")
        if len(self.column_names) != self.values.shape[1]:
            raise ValueError("column_names does not match the number of columns")
        if np.isnan(self.values).any():
            raise ValueError("values contain NaN")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int8)
            if self.labels.shape != (self.values.shape[0],):
                raise ValueError("labels must have one entry per row")
            if not np.isin(self.labels, (0, 1)).all():
                raise ValueError("labels must be 0/1")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "TimeSeriesMatrix":
        return replace(self, values=values)


def read_csv(path, label_column: str = LABEL_COLUMN) -> TimeSeriesMatrix:
    """Load a header-ed CSV. A ``label`` column (0/1 or Normal/Attack) and a
    timestamp-like column are split off; every other column must be numeric."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    df = pd.read_csv(path, float_precision="round_trip")
    df.columns = [str(c).strip() for c in df.columns]
    labels = None
    lab_col = next((c for c in df.columns if c.lower() == label_column.lower()), None)
    if lab_col is not None:
        raw = df.pop(lab_col)
        if raw.dtype == object:
            mapped = raw.astype(str).str.strip().str.lower().map(_LABEL_WORDS)
            if mapped.isna().any():
                bad = raw[mapped.isna()].iloc[0]
                raise ValueError(f"unrecognised label value {bad!r}")
            labels = mapped.to_numpy(dtype=np.int8)
        else:
            labels = raw.to_numpy().astype(np.int8)
    timestamps = None
    ts_col = next((c for c in df.columns if c.lower() in TIMESTAMP_COLUMNS), None)
    if ts_col is not None:
        timestamps = df.pop(ts_col).to_numpy()
    try:
        values = df.to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric signal column ({exc})") from None
    if np.isnan(values).any():
        col = df.columns[np.isnan(values).any(axis=0)][0]
        raise ValueError(f"{path}: missing values in column {col!r}")
    return TimeSeriesMatrix(values, list(df.columns), labels, timestamps)


def read_wadi_csv(path) -> TimeSeriesMatrix:
    """Load a raw WADI export.

    Handles the quirks of the published files: free-text lines above the
    header, ``Row``/``Date``/``Time`` columns, sensors that were never logged
    (all-empty columns, dropped), isolated gaps (filled from the neighbouring
    samples) and an attack column coded 1 = normal, -1 = attack.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, encoding="utf-8", errors="replace") as fh:
        skip = next((i for i, line in enumerate(fh) if line.lstrip().lower().startswith("row")), None)
    if skip is None:
        raise ValueError(f"{path}: no header row starting with 'Row'")
    df = pd.read_csv(path, skiprows=skip, float_precision="round_trip", low_memory=False)
    df.columns = [str(c).strip() for c in df.columns]
    df = df.drop(columns=[c for c in df.columns if c.lower() in ("row", "date", "time")])
    labels = None
    lab_col = next((c for c in df.columns if "attack" in c.lower()), None)
    if lab_col is not None:
        raw = df.pop(lab_col).to_numpy()
        if not np.isin(raw, (1, -1)).all():
            raise ValueError(f"{path}: attack column must hold 1 (normal) or -1 (attack)")
        labels = (raw == -1).astype(np.int8)
    df = df.apply(pd.to_numeric, errors="coerce").dropna(axis=1, how="all")
    df = df.ffill().bfill()
    return TimeSeriesMatrix(df.to_numpy(dtype=np.float64), list(df.columns), labels)


def select_columns(data: TimeSeriesMatrix, names) -> TimeSeriesMatrix:
    """Columns ``names`` in that order; a missing one raises KeyError."""
    index = {c: i for i, c in enumerate(data.column_names)}
    missing = [n for n in names if n not in index]
    if missing:
        raise KeyError(f"data lacks signal(s) {missing[:5]}")
    cols = [index[n] for n in names]
    return replace(data, values=data.values[:, cols], column_names=list(names))


def write_csv(data: TimeSeriesMatrix, path) -> None:
    df = pd.DataFrame(data.values, columns=data.column_names)
    if data.timestamps is not None:
        df.insert(0, "timestamp", data.timestamps)
    if data.labels is not None:
        df[LABEL_COLUMN] = data.labels
    df.to_csv(path, index=False, float_format="%.17g")


# --- scaling ---------------------------------------------------------------


@dataclass
class ScalingParams:
    column_names: list[str]
    min: np.ndarray
    max: np.ndarray
    constant: np.ndarray = field(init=False)

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=np.float64)
        self.max = np.asarray(self.max, dtype=np.float64)
        if (self.max < self.min).any():
            raise ValueError("max < min in scaling params")
        self.constant = self.max == self.min

    def to_dict(self) -> dict:
        return {
            "column_names": list(self.column_names),
            "min": [float(v) for v in self.min],
            "max": [float(v) for v in self.max],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingParams":
        return cls(list(d["column_names"]), d["min"], d["max"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "ScalingParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_minmax(train: TimeSeriesMatrix) -> ScalingParams:
    if train.T == 0:
        raise ValueError("cannot fit scaling on an empty matrix")
    return ScalingParams(list(train.column_names), train.values.min(axis=0), train.values.max(axis=0))


def _values(data) -> np.ndarray:
    return data.values if isinstance(data, TimeSeriesMatrix) else np.asarray(data, dtype=np.float64)


def apply_minmax(params: ScalingParams, data):
    """(x - min) / (max - min) with the training factors. Not clipped: test values
    outside the training range stay outside [0, 1]. Constant columns map to 0."""
    x = _values(data)
    if x.shape[-1] != len(params.min):
        raise ValueError(f"expected {len(params.min)} columns, got {x.shape[-1]}")
    if isinstance(data, TimeSeriesMatrix) and list(data.column_names) != list(params.column_names):
        raise ValueError("column names differ from the ones the scaling was fitted on")
    span = np.where(params.constant, 1.0, params.max - params.min)
    scaled = (x - params.min) / span
    scaled[..., params.constant] = 0.0
    return data.with_values(scaled) if isinstance(data, TimeSeriesMatrix) else scaled


def invert_minmax(params: ScalingParams, data):
    x = _values(data)
    span = np.where(params.constant, 0.0, params.max - params.min)
    out = x * span + params.min
    return data.with_values(out) if isinstance(data, TimeSeriesMatrix) else out


def exclude_signals(data: TimeSeriesMatrix, names) -> TimeSeriesMatrix:
    names = list(names)
    unknown = [n for n in names if n not in data.column_names]
    if unknown:
        raise KeyError(f"unknown column(s): {unknown}")
    keep = [i for i, c in enumerate(data.column_names) if c not in set(names)]
    return replace(
        data,
        values=data.values[:, keep],
        column_names=[data.column_names[i] for i in keep],
    )


# --- decimation ------------------------------------------------------------

# scipy's default IIR decimator design: 8th-order Chebyshev I, 0.05 dB ripple,
# cutoff 0.8 * Nyquist / q, run forward and backward (zero phase). An even-order
# Chebyshev I sits at the bottom of its ripple at DC, so the design is rescaled
# to unit DC gain; constant signals then pass unchanged.
FILTER_ORDER = 8
FILTER_RIPPLE_DB = 0.05


def antialias_sos(q: int) -> np.ndarray:
    sos = signal.cheby1(FILTER_ORDER, FILTER_RIPPLE_DB, 0.8 / q, output="sos")
    dc = np.prod(sos[:, :3].sum(axis=1) / sos[:, 3:].sum(axis=1))
    sos[0, :3] /= dc
    return sos


def _filter_padlen(sos: np.ndarray) -> int:
    # mirrors sosfiltfilt's default padding
    n = 2 * len(sos) + 1 - min((sos[:, 2] == 0).sum(), (sos[:, 5] == 0).sum())
    return 3 * int(n)


def decimate(data: TimeSeriesMatrix, q: int) -> TimeSeriesMatrix:
    """Anti-aliased down-sampling by ``q`` (keeps rows 0, q, 2q, ...).

    Labels are reduced with an OR over each stride so a short anomaly segment
    cannot vanish between kept samples.
    """
    if int(q) != q or q < 1:
        raise ValueError(f"down-sampling rate must be a positive integer, got {q}")
    q = int(q)
    if q == 1:
        return data
    sos = antialias_sos(q)
    padlen = _filter_padlen(sos)
    if data.T <= padlen:
        raise ValueError(f"series of length {data.T} is too short to filter (need > {padlen})")
    values = signal.sosfiltfilt(sos, data.values, axis=0)[::q]
    labels = None
    if data.labels is not None:
        n_out = values.shape[0]
        padded = np.zeros(n_out * q, dtype=np.int8)
        padded[: data.T] = data.labels
        labels = padded.reshape(n_out, q).max(axis=1)
    timestamps = data.timestamps[::q] if data.timestamps is not None else None
    period = data.sample_period * q if data.sample_period is not None else None
    return TimeSeriesMatrix(np.ascontiguousarray(values), list(data.column_names), labels, timestamps, period)


# --- windows ---------------------------------------------------------------


@dataclass
class WindowSeries:
    """Sliding windows over ``data``; window i covers rows
    ``end(i) - K + 1 .. end(i)`` with ``end(i) = K - 1 + i * step`` (0-based)."""

    data: np.ndarray
    K: int
    step: int = 1
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return (self.data.shape[0] - self.K) // self.step + 1

    @property
    def m(self) -> int:
        return self.data.shape[1]

    @property
    def ends(self) -> np.ndarray:
        return self.K - 1 + self.step * np.arange(len(self))

    def windows(self, idx=None) -> np.ndarray:
        """(N, K, m) view of the windows (a copy when ``idx`` is given)."""
        view = np.lib.stride_tricks.sliding_window_view(self.data, self.K, axis=0)
        view = view.transpose(0, 2, 1)[:: self.step]
        return view if idx is None else view[idx]

    def flat(self, idx=None) -> np.ndarray:
        """Windows flattened time-major: all m signals of the oldest instant first."""
        w = self.windows(idx)
        return np.ascontiguousarray(w).reshape(w.shape[0], self.K * self.m)

    def last(self, idx=None) -> np.ndarray:
        """(N, m) rows at each window's final instant."""
        ends = self.ends if idx is None else self.ends[idx]
        return self.data[ends]

    def window_labels(self) -> np.ndarray | None:
        return None if self.labels is None else self.labels[self.ends]


def make_windows(data, K: int, step: int = 1) -> WindowSeries:
    values = _values(data)
    labels = data.labels if isinstance(data, TimeSeriesMatrix) else None
    if K < 1 or step < 1:
        raise ValueError("K and step must be >= 1")
    if values.shape[0] < K:
        raise ValueError(f"series of length {values.shape[0]} is shorter than the window K={K}")
    return WindowSeries(np.ascontiguousarray(values), int(K), int(step), labels)


def split_train_val(n_windows, ratio: tuple[int, int] = (4, 1), seed: int = 0):
    """Random index partition into training and validation windows.

    ``n_windows`` may be an int or anything with ``len``. The validation share
    is round(N * val / (train + val)); indices are returned sorted.
    """
    n = n_windows if isinstance(n_windows, (int, np.integer)) else len(n_windows)
    n_train_part, n_val_part = ratio
    if n < n_train_part + n_val_part:
        raise ValueError(f"need at least {n_train_part + n_val_part} windows to split, got {n}")
    n_val = int(round(n * n_val_part / (n_train_part + n_val_part)))
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])
