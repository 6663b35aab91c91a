import numpy as np
import pytest

from tsae import synthetic as S


def lag1(x):
    x = x - x.mean()
    return float(np.dot(x[:-1], x[1:]) / np.dot(x, x))


def test_slow_part_alone_is_smooth():
    spec = S.SyntheticSpec(m=6, T_train=3000, T_test=1000, amplitude_ratio=float("inf"), seed=1)
    train, test = S.generate(spec)
    x = np.vstack([train.values, test.values])
    assert min(lag1(x[:, j]) for j in range(6)) > 0.95


@pytest.mark.parametrize("process", ["spike", "gaussian"])
def test_driver_families_uncorrelated(process):
    spec = S.SyntheticSpec(m=10, T_train=9000, T_test=3000, short_process=process, seed=2)
    parts = S.generate_parts(spec)
    mx, _, _, _ = S.correlation_separation_check(parts.long_drivers, parts.short_drivers)
    assert mx < 0.1


def test_energy_ratio():
    spec = S.SyntheticSpec(m=12, T_train=4000, T_test=1000, amplitude_ratio=7.0, seed=3)
    parts = S.generate_parts(spec)
    ratio = parts.long_part.var(axis=0) / parts.short_part.var(axis=0)
    assert np.all(ratio >= 49 * (1 - 1e-9))


def test_mean_shift_is_visible():
    shift = S.Anomaly("mean-shift", [0, 4, 7], start=500, duration=200, magnitude=10.0)
    base = dict(m=10, T_train=4000, T_test=2000, seed=4)
    _, clean = S.generate(S.SyntheticSpec(**base))
    train, hit = S.generate(S.SyntheticSpec(**base, anomalies=[shift]))
    parts = S.generate_parts(S.SyntheticSpec(**base))
    # short-term std expressed in post-scaling units of each signal
    raw = parts.long_part[:4000] + parts.short_part[:4000]
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    short_std = parts.short_part[:4000].std(axis=0) * 0.8 / (hi - lo)
    seg = slice(500, 700)
    delta = (hit.values[seg] - clean.values[seg]).mean(axis=0)
    for j in (0, 4, 7):
        assert delta[j] >= 5 * short_std[j]
    others = [j for j in range(10) if j not in (0, 4, 7)]
    assert np.array_equal(hit.values[:, others], clean.values[:, others])
    assert hit.labels[seg].all() and hit.labels.sum() == 200
    assert train.labels is None


def test_seed_determinism_and_ranges():
    spec = S.benchmark_spec(seed=5, m=8, T_train=3000, T_test=1200)
    a_train, a_test = S.generate(spec)
    b_train, b_test = S.generate(S.benchmark_spec(seed=5, m=8, T_train=3000, T_test=1200))
    assert np.array_equal(a_train.values, b_train.values)
    assert np.array_equal(a_test.values, b_test.values) and np.array_equal(a_test.labels, b_test.labels)
    assert a_train.values.min() == pytest.approx(0.1) and a_train.values.max() == pytest.approx(0.9)
    c_train, _ = S.generate(S.benchmark_spec(seed=6, m=8, T_train=3000, T_test=1200))
    assert not np.array_equal(a_train.values, c_train.values)
    assert len(spec.anomalies) == 6


def test_validation_errors():
    with pytest.raises(ValueError, match="outside"):
        S.SyntheticSpec(T_test=100, anomalies=[S.Anomaly("drift", [0], start=90, duration=20, magnitude=1.0)])
    with pytest.raises(ValueError):
        S.Anomaly("wobble", [0], 0, 5, 1.0)
    with pytest.raises(ValueError):
        S.SyntheticSpec(amplitude_ratio=2.0)


def test_spec_json_round_trip(tmp_path):
    spec = S.benchmark_spec(seed=1)
    spec.save(tmp_path / "s.json")
    back = S.SyntheticSpec.load(tmp_path / "s.json")
    assert back == spec


def test_correlation_check_trivial_cases():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((500, 4))
    mx, mean, rho, flags = S.correlation_separation_check(x, np.zeros((500, 4)))
    assert mx == 0.0 and mean == 0.0 and len(flags) == 4
    _, _, rho, flags = S.correlation_separation_check(x, x)
    assert np.allclose(np.diag(rho), 1.0) and not flags
    mx, _, _, _ = S.correlation_separation_check(rng.standard_normal((10_000, 4)), rng.standard_normal((10_000, 4)))
    assert mx < 0.05
    with pytest.raises(ValueError):
        S.correlation_separation_check(x, x[:10])
