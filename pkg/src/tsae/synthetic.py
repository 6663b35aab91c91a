"""Synthetic plant-like signals with a slow global component and a fast local one.

Each signal is

    x_i(t) = long_i(t) + short_i(t) + noise_i(t)

where ``long_i`` mixes a few slowly wandering drivers shared by every signal,
and ``short_i`` mixes temporally white drivers that each touch only a handful
of signals. By default the short drivers are sparse positive spikes (pulsation
bursts); ``short_process="gaussian"`` gives plain white noise instead. The two
driver families are drawn independently. Anomalies are injected into the test
span only.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .preprocessing import TimeSeriesMatrix

ANOMALY_KINDS = ("mean-shift", "drift", "correlation-break")
SHORT_PROCESSES = ("spike", "gaussian")


@dataclass
class Anomaly:
    kind: str
    signals: list[int]
    start: int  # index into the test span
    duration: int
    magnitude: float  # in units of the short-term amplitude

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}; expected one of {ANOMALY_KINDS}")
        if self.duration < 1 or not self.signals:
            raise ValueError("an anomaly needs a positive duration and at least one signal")


@dataclass
class SyntheticSpec:
    m: int = 30
    T_train: int = 20_000
    T_test: int = 5_000
    n_long: int = 3
    n_short: int = 3
    long_amplitude: float = 1.0
    amplitude_ratio: float = 5.0  # long / short, per signal (std)
    signals_per_short: tuple[int, int] = (3, 8)
    short_process: str = "spike"
    spike_rate: float = 0.05
    noise: float = 0.0  # sensor noise std, in units of the short-term amplitude
    smooth_window: int | None = None  # default (T_train + T_test) // 20
    anomalies: list[Anomaly] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.anomalies = [a if isinstance(a, Anomaly) else Anomaly(**a) for a in self.anomalies]
        # a small plant cannot give a driver more signals than it has
        lo, hi = self.signals_per_short
        self.signals_per_short = (min(lo, self.m), min(hi, self.m))
        self.validate()

    @property
    def short_amplitude(self) -> float:
        return self.long_amplitude / self.amplitude_ratio

    def validate(self) -> None:
        if min(self.m, self.T_train, self.T_test, self.n_long, self.n_short) < 1:
            raise ValueError("m, lengths and driver counts must be positive")
        if self.short_process not in SHORT_PROCESSES:
            raise ValueError(f"short_process must be one of {SHORT_PROCESSES}")
        if not 0 < self.spike_rate <= 1:
            raise ValueError("spike_rate must lie in (0, 1]")
        if self.amplitude_ratio < 5:
            raise ValueError("amplitude_ratio must be at least 5")
        lo, hi = self.signals_per_short
        if not 1 <= lo <= hi <= self.m:
            raise ValueError("signals_per_short must satisfy 1 <= lo <= hi <= m")
        for a in self.anomalies:
            if a.start < 0 or a.start + a.duration > self.T_test:
                raise ValueError(
                    f"anomaly [{a.start}, {a.start + a.duration}) lies outside the test span [0, {self.T_test})"
                )
            if min(a.signals) < 0 or max(a.signals) >= self.m:
                raise ValueError(f"anomaly signal index out of range 0..{self.m - 1}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["signals_per_short"] = list(self.signals_per_short)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


@dataclass
class SyntheticParts:
    """Latent pieces behind a generated dataset (train and test stacked in time)."""

    long_drivers: np.ndarray  # (T, n_long)
    short_drivers: np.ndarray  # (T, n_short)
    long_part: np.ndarray  # (T, m)
    short_part: np.ndarray  # (T, m)
    short_mixing: np.ndarray  # (m, n_short)


def _smoothed_walk(rng, n: int, window: int) -> np.ndarray:
    # a walk reflected into [-1, 1] keeps the test span inside the training range
    steps = rng.normal(0.0, 4.0 / np.sqrt(n), size=n + window - 1)
    walk = np.cumsum(steps)
    walk = np.abs((walk + 1.0) % 4.0 - 2.0) - 1.0
    kernel = np.ones(window) / window
    return np.convolve(walk, kernel, mode="valid")


def _standardize_rows(part: np.ndarray, target_std: float) -> np.ndarray:
    part = part - part.mean(axis=0)
    std = part.std(axis=0)
    std[std == 0] = 1.0
    return part * (target_std / std)


def generate_parts(spec: SyntheticSpec) -> SyntheticParts:
    """Draws every random quantity in a fixed order: long drivers, long mixing,
    short drivers, short mixing, then noise."""
    rng = np.random.default_rng(spec.seed)
    n = spec.T_train + spec.T_test
    window = spec.smooth_window or max(1, n // 20)

    long_drivers = np.column_stack([_smoothed_walk(rng, n, window) for _ in range(spec.n_long)])
    g = rng.uniform(-1.0, 1.0, size=(spec.m, spec.n_long))
    long_part = _standardize_rows(long_drivers @ g.T, spec.long_amplitude)

    if spec.short_process == "spike":
        fired = rng.random((n, spec.n_short)) < spec.spike_rate
        short_drivers = fired * rng.exponential(1.0, size=(n, spec.n_short))
    else:
        short_drivers = rng.standard_normal((n, spec.n_short))
    lo, hi = spec.signals_per_short
    mix = np.zeros((spec.m, spec.n_short))
    for j in range(spec.n_short):
        k = int(rng.integers(lo, hi + 1))
        rows = rng.choice(spec.m, size=k, replace=False)
        mix[rows, j] = rng.uniform(0.5, 1.0, size=k)
    # signals no driver reached get their own private driver weight so every
    # signal carries a short-term component
    orphan = np.flatnonzero(~mix.any(axis=1))
    for i in orphan:
        mix[i, int(rng.integers(spec.n_short))] = rng.uniform(0.5, 1.0)
    short_part = _standardize_rows(short_drivers @ mix.T, spec.short_amplitude)
    return SyntheticParts(long_drivers, short_drivers, long_part, short_part, mix)


def _inject(test: np.ndarray, short_test: np.ndarray, spec: SyntheticSpec) -> np.ndarray:
    labels = np.zeros(spec.T_test, dtype=np.int8)
    amp = spec.short_amplitude
    for a in spec.anomalies:
        sl = slice(a.start, a.start + a.duration)
        cols = np.asarray(a.signals)
        if a.kind == "mean-shift":
            test[sl, cols] += a.magnitude * amp
        elif a.kind == "drift":
            ramp = np.linspace(0.0, a.magnitude * amp, a.duration)
            test[sl, cols] += ramp[:, None]
        else:
            # flip the short-term component of the chosen signals (scaled by
            # magnitude): marginal spreads stay plausible, cross-signal
            # correlation with the untouched signals is broken
            test[sl, cols] -= (1.0 + a.magnitude) * short_test[sl][:, cols]
        labels[sl] = 1
    return labels


def generate(spec: SyntheticSpec) -> tuple[TimeSeriesMatrix, TimeSeriesMatrix]:
    """(train, test); train is anomaly-free, test carries 0/1 labels."""
    spec.validate()
    parts = generate_parts(spec)
    rng = np.random.default_rng([spec.seed, 1])
    n = spec.T_train + spec.T_test
    x = parts.long_part + parts.short_part
    if spec.noise > 0:
        x = x + rng.normal(0.0, spec.noise * spec.short_amplitude, size=x.shape)

    train = x[: spec.T_train].copy()
    test = x[spec.T_train :].copy()
    labels = _inject(test, parts.short_part[spec.T_train :], spec)

    # map the training range of each signal onto [0.1, 0.9]
    lo, hi = train.min(axis=0), train.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    train = 0.1 + 0.8 * (train - lo) / span
    test = 0.1 + 0.8 * (test - lo) / span

    names = [f"s{i:03d}" for i in range(spec.m)]
    assert n == train.shape[0] + test.shape[0]
    return TimeSeriesMatrix(train, names), TimeSeriesMatrix(test, names, labels)


BENCHMARK_MAGNITUDES = {"mean-shift": 2.0, "drift": 6.0, "correlation-break": 2.0}


def benchmark_spec(seed: int = 0, m: int = 30, T_train: int = 20_000, T_test: int = 5_000,
                   magnitudes: dict | None = None, **overrides) -> SyntheticSpec:
    """Six anomalies spread over the test span, two of each kind.

    Shifts and drifts get a random sign; correlation breaks always flip.
    """
    mags = {**BENCHMARK_MAGNITUDES, **(magnitudes or {})}
    rng = np.random.default_rng([seed, 7])
    slot = T_test // 6
    kinds = ["mean-shift", "correlation-break", "drift", "mean-shift", "correlation-break", "drift"]
    anomalies = []
    for i, kind in enumerate(kinds):
        duration = int(rng.integers(slot // 8, slot // 4))
        start = i * slot + int(rng.integers(slot // 4, slot - duration))
        sig = sorted(int(s) for s in rng.choice(m, size=3, replace=False))
        sign = float(rng.choice([-1.0, 1.0]))
        mag = mags[kind] if kind == "correlation-break" else sign * mags[kind]
        anomalies.append(Anomaly(kind, sig, start, duration, mag))
    kw = dict(m=m, T_train=T_train, T_test=T_test, anomalies=anomalies, noise=0.2, seed=seed)
    kw.update(overrides)
    return SyntheticSpec(**kw)


def correlation_separation_check(x_rec, dx):
    """Pearson correlations between every column of ``x_rec`` and every column of ``dx``.

    Returns (max |rho|, mean |rho|, cross matrix (m x m), flags). Columns with
    zero variance get rho = 0 and are listed in ``flags``.
    """
    a = np.asarray(x_rec, dtype=np.float64)
    b = np.asarray(dx, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[0] != b.shape[0]:
        raise ValueError("series must have equal length")
    if a.shape[0] < 2:
        raise ValueError("need at least two samples")
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    na = np.sqrt((a * a).sum(axis=0))
    nb = np.sqrt((b * b).sum(axis=0))
    # relative tolerance: a column that is constant up to rounding counts as constant
    za = na <= 1e-12 * max(1.0, float(np.abs(x_rec).max()) if np.size(x_rec) else 1.0)
    zb = nb <= 1e-12 * max(1.0, float(np.abs(dx).max()) if np.size(dx) else 1.0)
    rho = (a.T @ b) / np.outer(np.where(za, 1.0, na), np.where(zb, 1.0, nb))
    rho[za, :] = 0.0
    rho[:, zb] = 0.0
    rho = np.clip(rho, -1.0, 1.0)
    flags = [f"x_rec[{i}] constant" for i in np.flatnonzero(za)] + [f"dx[{j}] constant" for j in np.flatnonzero(zb)]
    absr = np.abs(rho)
    return float(absr.max()), float(absr.mean()), rho, flags
