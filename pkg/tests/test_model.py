import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsae import model as M, nn, preprocessing as pp, synthetic as S


def random_model(m=4, K=3, seed=0):
    ae1 = nn.init_dense_net(M.hidden_dims(m * K, [0.5]), seed=seed)
    ae2 = nn.init_dense_net([m, max(1, m // 2), m], seed=seed + 1)
    return M.TSAEModel(ae1, ae2, K, m)


def small_series(T=400, m=4, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(T)[:, None]
    vals = 0.5 + 0.3 * np.sin(t / 20 + np.arange(m)) + 0.05 * rng.standard_normal((T, m))
    return pp.TimeSeriesMatrix(vals, [f"c{i}" for i in range(m)])


FAST = M.TrainConfig(epochs_ae1=3, epochs_ae2=3, batch_size=32, lr_ae1=1e-3)


def test_default_dims():
    assert M.hidden_dims(1220, [0.5]) == [1220, 610, 1220]
    assert M.hidden_dims(122, [0.1]) == [122, 12, 122]
    assert M.hidden_dims(1220, [0.5, 0.25]) == [1220, 610, 305, 610, 1220]


def test_reconstruct_matches_hand_chained_oracle():
    mdl = random_model()
    w = np.random.default_rng(1).random((3, 4))
    x_rec, dx_rec, r = M.reconstruct(mdl, w)
    # chained by hand: ae1, slice the last instant, subtract, ae2, add
    full = nn.forward(mdl.ae1, w.reshape(1, -1))[0]
    x_oracle = full[-4:]
    dx_oracle = nn.forward(mdl.ae2, (w[-1] - x_oracle).reshape(1, -1))[0]
    assert np.array_equal(x_rec, x_oracle)
    assert np.array_equal(dx_rec, dx_oracle)
    assert np.array_equal(r, x_oracle + dx_oracle)


def test_identity_second_stage_gives_exact_reconstruction():
    mdl = random_model()
    w = np.random.default_rng(2).random((3, 4))
    x_rec, _, _ = M.reconstruct(mdl, w)
    # if the second stage reproduced dx exactly, R = x' + (x - x') = x
    dx = w[-1] - x_rec
    assert np.allclose(x_rec + dx, w[-1], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_batch_and_single_window_agree(seed):
    mdl = random_model(seed=seed % 7)
    ws = np.random.default_rng(seed).random((5, 3, 4))
    x_rec, dx_rec, r = M.reconstruct_batch(mdl, ws)
    scores = M.anomaly_scores(mdl, ws)
    for i in range(5):
        xi, dxi, ri = M.reconstruct(mdl, ws[i])
        assert np.array_equal(r[i], x_rec[i] + dx_rec[i])
        assert np.array_equal(ri, xi + dxi)
        assert M.anomaly_score(mdl, ws[i]) == nn.recon_loss(ws[i][-1], ri)
        assert scores[i] == pytest.approx(M.anomaly_score(mdl, ws[i]), rel=1e-12)
        assert scores[i] >= 0


def test_score_examples():
    assert nn.recon_loss(np.array([0.3, 0.4]), np.array([0.3, 0.4])) == 0.0
    assert nn.recon_loss(np.array([0.1, -0.2]), np.zeros(2)) == pytest.approx(0.05, abs=1e-17)


def test_detect_examples_and_monotonicity():
    s = np.array([0.1, 0.5, 0.2, 0.9])
    assert M.detect(s, threshold=1.0).tolist() == [0, 0, 0, 0]
    assert M.detect(s, threshold=-1.0).tolist() == [1, 1, 1, 1]
    assert M.detect(s, threshold=0.5).tolist() == [0, 0, 0, 1]
    with pytest.raises(ValueError):
        M.detect(s, threshold=float("nan"))
    rng = np.random.default_rng(0)
    s = rng.random(200)
    for lo, hi in [(0.1, 0.3), (0.5, 0.51), (0.0, 1.0)]:
        a, b = M.detect(s, threshold=lo), M.detect(s, threshold=hi)
        assert np.all(b <= a)
        assert a.tolist() == [1 if v > lo else 0 for v in s]


def test_detect_from_model_and_windows():
    mdl = random_model()
    ws = np.random.default_rng(3).random((10, 3, 4))
    lam = float(np.median(M.anomaly_scores(mdl, ws)))
    assert np.array_equal(M.detect(mdl, ws, lam), M.detect(M.anomaly_scores(mdl, ws), threshold=lam))


def test_ae1_frozen_during_second_stage():
    windows = pp.make_windows(small_series(), 5)
    ae1, _, _ = M.train_ae1(windows, FAST)
    before = [p.copy() for p in ae1.params()]
    mdl = M.train_tsae(windows, FAST, ae1=ae1)
    for a, b, c in zip(before, mdl.ae1.params(), ae1.params()):
        assert np.array_equal(a, b) and np.array_equal(a, c)


def test_constant_data_is_learnt():
    data = pp.TimeSeriesMatrix(np.full((3000, 3), 0.5), ["a", "b", "c"])
    windows = pp.make_windows(data, 4)
    cfg = M.TrainConfig(epochs_ae1=50, epochs_ae2=1, batch_size=32)
    mdl = M.train_tsae(windows, cfg)
    assert mdl.meta["ae1_history"]["train_loss"][-1] < 1e-3


def test_training_is_deterministic(tmp_path):
    windows = pp.make_windows(small_series(), 5)
    a = M.train_tsae(windows, FAST)
    b = M.train_tsae(windows, FAST)
    for p, q in zip(a.ae1.params() + a.ae2.params(), b.ae1.params() + b.ae2.params()):
        assert np.array_equal(p, q)
    M.save_model(a, tmp_path / "a.tsae")
    M.save_model(b, tmp_path / "b.tsae")
    assert (tmp_path / "a.tsae").read_bytes() == (tmp_path / "b.tsae").read_bytes()


def test_second_stage_reduces_residual_energy():
    # held-out normal data from the two-component generator
    train, test = S.generate(S.SyntheticSpec(m=10, T_train=4000, T_test=1000, noise=0.2, seed=0))
    windows, held_out = pp.make_windows(train, 5), pp.make_windows(test, 5)
    cfg = M.TrainConfig(epochs_ae1=20, epochs_ae2=60, batch_size=64, ae2_batch_size=8, lr_ae1=1e-3)
    mdl = M.train_tsae(windows, cfg)
    x_rec, dx_rec, _ = M.reconstruct_batch(mdl, held_out)
    dx = held_out.last() - x_rec
    assert np.mean(np.sum((dx_rec - dx) ** 2, axis=1)) < np.mean(np.sum(dx**2, axis=1))


def test_save_load_round_trip(tmp_path):
    mdl = random_model(m=5, K=4)
    mdl.scaling = pp.ScalingParams([f"c{i}" for i in range(5)], np.zeros(5), np.ones(5))
    path = tmp_path / "m.tsae"
    M.save_model(mdl, path)
    back = M.load_model(path)
    assert back.ae1.layer_dims == mdl.ae1.layer_dims and back.ae2.layer_dims == mdl.ae2.layer_dims
    ws = np.random.default_rng(5).random((100, 4, 5))
    assert np.array_equal(M.anomaly_scores(back, ws), M.anomaly_scores(mdl, ws))
    assert back.scaling.column_names == mdl.scaling.column_names
    with pytest.raises(ValueError, match="m=5"):
        M.load_model(path, m=6)


def test_load_rejects_bad_files(tmp_path):
    bad = tmp_path / "junk.tsae"
    bad.write_bytes(b"not a zip")
    with pytest.raises(ValueError, match="corrupt"):
        M.load_model(bad)
    mdl = random_model()
    header = {"format": M.FORMAT_NAME, "version": M.FORMAT_VERSION + 1, "kind": "tsae"}
    M.write_container(tmp_path / "v2.tsae", header, nn.net_to_arrays(mdl.ae1, "ae1"))
    with pytest.raises(ValueError, match="version"):
        M.load_model(tmp_path / "v2.tsae")


def test_window_shape_errors():
    mdl = random_model()
    with pytest.raises(ValueError):
        M.anomaly_scores(mdl, np.zeros((2, 3, 5)))
    with pytest.raises(ValueError):
        M.TSAEModel(mdl.ae1, mdl.ae2, 4, 4)
