import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsae import evaluation as ev

from oracles import best_f1_oracle, point_adjust_oracle, prf_oracle, runs_of_ones

labels = st.lists(st.integers(0, 1), min_size=1, max_size=60)


def test_segments_examples():
    assert ev.segments_from_labels([0, 0, 0]) == []
    assert ev.segments_from_labels([0, 1, 1, 0, 1]) == [(1, 2), (4, 4)]
    assert ev.segments_from_labels([1]) == [(0, 0)]


@given(labels)
def test_segments_match_run_length_oracle(y):
    assert [tuple(s) for s in ev.segments_from_labels(y)] == runs_of_ones(y)


def test_point_adjust_examples():
    truth = [0, 0, 1, 1, 1, 1, 0, 0]
    pred = [0, 0, 0, 1, 0, 0, 0, 1]
    assert ev.point_adjust(pred, truth).tolist() == [0, 0, 1, 1, 1, 1, 0, 1]
    miss = [1, 0, 0, 0, 0, 0, 1, 0]
    assert ev.point_adjust(miss, truth).tolist() == miss
    with pytest.raises(ValueError):
        ev.point_adjust([0, 1], [0, 1, 1])


def test_prf_examples():
    assert ev.prf([0, 1, 1], [0, 1, 1])[:3] == (1.0, 1.0, 1.0)
    r = ev.prf([1, 1, 0], [1, 0, 0])
    assert (r.tp, r.fp, r.fn) == (1, 1, 0)
    assert r.precision == 0.5 and r.recall == 1.0 and r.f1 == pytest.approx(2 / 3, abs=0)
    z = ev.prf([0, 0], [0, 0])
    assert z[:3] == (0.0, 0.0, 0.0)


@given(st.data())
def test_point_adjust_and_prf_match_oracle(data):
    n = data.draw(st.integers(1, 60))
    pred = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    truth = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    adj = ev.point_adjust(pred, truth)
    assert adj.tolist() == point_adjust_oracle(pred, truth)
    assert tuple(ev.prf(adj, truth)) == prf_oracle(adj.tolist(), truth)


@given(st.data())
def test_point_adjust_invariants(data):
    n = data.draw(st.integers(1, 60))
    pred = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    truth = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    adj = ev.point_adjust(pred, truth)
    assert np.array_equal(adj[truth == 0], pred[truth == 0])
    assert ev.prf(adj, truth).tp >= ev.prf(pred, truth).tp
    segs = ev.segments_from_labels(truth)
    all_hit = all(pred[a : b + 1].any() for a, b in segs)
    if segs:
        assert (ev.prf(adj, truth).recall == 1.0) == all_hit
    r = ev.prf(adj, truth)
    assert all(0 <= v <= 1 for v in r[:3])


def test_sweep_examples():
    lam, rep = ev.best_f1_sweep([1.0, 2.0, 3.0], [0, 0, 1])
    assert lam == 2.0 and (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)
    lam, rep = ev.best_f1_sweep([0.5, 0.2, 0.9], [0, 0, 0])
    assert rep.f1 == 0.0 and lam > 0.9 and rep.fp == 0
    assert "no_truth_segments" in rep.flags
    with pytest.raises(ValueError):
        ev.best_f1_sweep([], [])


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_sweep_matches_exhaustive_oracle(data):
    n = data.draw(st.integers(1, 80))
    scores = data.draw(st.lists(st.integers(0, 12).map(float), min_size=n, max_size=n))
    truth = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    lam, rep = ev.best_f1_sweep(scores, truth)
    o_lam, o_f1 = best_f1_oracle(scores, truth)
    assert rep.f1 == o_f1
    if o_lam > max(scores):
        assert lam > max(scores)
    elif o_lam < min(scores):
        assert lam < min(scores)
    else:
        assert lam == o_lam


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_sweep_beats_any_user_threshold(data):
    n = data.draw(st.integers(1, 50))
    scores = data.draw(st.lists(st.floats(0, 10, allow_nan=False), min_size=n, max_size=n))
    truth = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    lam = data.draw(st.floats(-1, 11, allow_nan=False))
    assert ev.best_f1_sweep(scores, truth)[1].f1 >= ev.evaluate(scores, truth, lam).f1


def test_sweep_curve_agrees_with_evaluate():
    rng = np.random.default_rng(4)
    s = rng.exponential(size=300)
    y = np.zeros(300, dtype=int)
    y[50:80] = y[200:210] = 1
    s[y == 1] += 1.0
    cand, p, r, f1, tp, fp, fn = ev.sweep_curve(s, y)
    for i in range(0, len(cand), 17):
        rep = ev.evaluate(s, y, cand[i])
        assert (rep.tp, rep.fp, rep.fn) == (tp[i], fp[i], fn[i])
        assert rep.f1 == f1[i]


def test_report_json_and_sweep_csv(tmp_path):
    rep = ev.evaluate([0.1, 0.9, 0.2, 0.8], [0, 1, 1, 0], 0.5)
    d = json.loads(rep.to_json())
    assert d["segments"] == [[1, 2]] and d["segment_detected"] == [True]
    assert d["tp"] == 2 and d["fp"] == 1 and d["raw"]["tp"] == 1
    ev.write_sweep_csv([0.1, 0.9, 0.2], [0, 1, 0], tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "threshold,precision,recall,f1" and len(lines) == 6
