"""Point-adjusted precision / recall / F1 and best-F1 threshold selection."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np


class AnomalySegment(NamedTuple):
    start: int
    end: int  # inclusive


def _labels(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    return (a > 0).astype(np.int8)


def segments_from_labels(truth) -> list[AnomalySegment]:
    """Maximal runs of 1s as inclusive (start, end) pairs."""
    y = _labels(truth)
    edges = np.diff(np.concatenate(([0], y, [0])).astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return [AnomalySegment(int(s), int(e)) for s, e in zip(starts, ends)]


def point_adjust(pred, truth) -> np.ndarray:
    """Mark a whole truth segment detected when any prediction inside it is 1."""
    p, y = _labels(pred), _labels(truth)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    out = p.copy()
    for s, e in segments_from_labels(y):
        if out[s : e + 1].any():
            out[s : e + 1] = 1
    return out


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def f1_from_counts(tp, fp, fn):
    """P, R, F1 from counts; each ratio is 0 where its denominator is 0."""
    tp, fp, fn = (np.asarray(v, dtype=np.float64) for v in (tp, fp, fn))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        r = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return p, r, f1


def prf(pred, truth) -> PRF:
    p, y = _labels(pred), _labels(truth)
    if p.shape != y.shape:
        raise ValueError("length mismatch")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    P, R, F = f1_from_counts(tp, fp, fn)
    return PRF(float(P), float(R), float(F), tp, fp, fn)


@dataclass
class EvalReport:
    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    segments: list[tuple[int, int]] = field(default_factory=list)
    segment_detected: list[bool] = field(default_factory=list)
    raw: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["segments"] = [list(s) for s in self.segments]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def evaluate(scores, truth, threshold: float) -> EvalReport:
    """Point-adjusted metrics for the alarms ``scores > threshold``."""
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(truth)
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {s.size} scores vs {y.size} labels")
    pred = (s > threshold).astype(np.int8)
    adj = point_adjust(pred, y)
    res = prf(adj, y)
    raw = prf(pred, y)
    segs = segments_from_labels(y)
    flags = []
    if not segs:
        flags.append("no_truth_segments")
    return EvalReport(
        threshold=float(threshold),
        tp=res.tp, fp=res.fp, fn=res.fn,
        precision=res.precision, recall=res.recall, f1=res.f1,
        segments=[tuple(sg) for sg in segs],
        segment_detected=[bool(pred[a : b + 1].any()) for a, b in segs],
        raw=raw._asdict(),
        flags=flags,
    )


def sweep_curve(scores, truth):
    """Point-adjusted (thresholds, P, R, F1, TP, FP, FN) for every candidate threshold.

    Candidates are the distinct score values plus one value below the minimum
    (everything alarms) and one above the maximum (nothing alarms); alarms are
    ``score > threshold``. Runs in O(n log n) using the fact that a
    segment is detected exactly when its maximum score exceeds the threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(truth)
    if s.size == 0:
        raise ValueError("empty score series")
    if s.shape != y.shape:
        raise ValueError("length mismatch")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    lo, top = s.min(), s.max()
    cand = np.concatenate(([lo - max(1.0, abs(lo))], np.unique(s), [top + max(1.0, abs(top))]))

    normal = np.sort(s[y == 0])
    fp = normal.size - np.searchsorted(normal, cand, side="right")

    segs = segments_from_labels(y)
    if segs:
        seg_max = np.array([s[a : b + 1].max() for a, b in segs])
        seg_len = np.array([b - a + 1 for a, b in segs], dtype=np.int64)
        order = np.argsort(seg_max, kind="stable")
        seg_max, seg_len = seg_max[order], seg_len[order]
        # tail sums: total length of segments whose max is > cand
        tail = np.concatenate((np.cumsum(seg_len[::-1])[::-1], [0]))
        tp = tail[np.searchsorted(seg_max, cand, side="right")]
        n_pos = int(seg_len.sum())
    else:
        tp = np.zeros(cand.size, dtype=np.int64)
        n_pos = 0
    fn = n_pos - tp
    p, r, f1 = f1_from_counts(tp, fp, fn)
    return cand, p, r, f1, tp, fp, fn


def best_f1_sweep(scores, truth) -> tuple[float, EvalReport]:
    """Threshold with the highest point-adjusted F1; ties go to the larger threshold."""
    cand, _, _, f1, *_ = sweep_curve(scores, truth)
    best = f1.max()
    idx = int(np.flatnonzero(f1 == best)[-1])
    lam = float(cand[idx])
    return lam, evaluate(scores, truth, lam)


def write_sweep_csv(scores, truth, path) -> None:
    cand, p, r, f1, *_ = sweep_curve(scores, truth)
    with open(path, "w") as fh:
        fh.write("threshold,precision,recall,f1\n")
        for row in zip(cand, p, r, f1):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
