import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gar import datasets as D


def test_sine_grid():
    d = D.gen_sine()
    assert d.n == 629
    assert d.features[0, 0] == -10 * math.pi
    assert abs(d.targets[0, 0]) < 1e-12
    assert d.features[-1, 0] <= 10 * math.pi
    assert np.all(np.abs(d.targets) <= 1.0)
    # index grid, no accumulated stepping
    assert d.features[100, 0] == -10 * math.pi + 0.1 * 100


def test_squared_sine_grid():
    d = D.gen_squared_sine()
    assert d.n == 20481
    mid = 10240
    assert d.features[mid, 0] == 0.0 and d.targets[mid, 0] == 0.0
    x2 = d.features[:, 0] ** 2
    assert abs(np.mean(x2 / x2.mean()) - 1.0) < 1e-12
    t = -1024 + 0.1 * np.arange(20481)
    np.testing.assert_array_equal(d.features[:, 0], np.sign(t) * np.sqrt(np.abs(t)))


def test_generators_bit_deterministic():
    assert D.gen_sine().features.tobytes() == D.gen_sine().features.tobytes()
    a, b = D.gen_squared_sine(), D.gen_squared_sine()
    assert a.targets.tobytes() == b.targets.tobytes()


def test_dataset_validation():
    with pytest.raises(ValueError):
        D.Dataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        D.Dataset(np.array([[np.inf]]), np.zeros(1))
    with pytest.raises(ValueError):
        D.Dataset(np.zeros((0, 1)), np.zeros((0, 1)))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_basic(tmp_path):
    p = write(tmp_path / "a.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    d = D.load_csv(p, ["y"])
    assert (d.n, d.n_features, d.n_targets) == (3, 2, 1)
    assert d.feature_names == ("a", "b") and d.target_names == ("y",)
    assert d.targets[:, 0].tolist() == [3.0, 6.0, 9.0]


def test_load_csv_errors(tmp_path):
    p = write(tmp_path / "a.csv", "a,b,y\n1,2,3\n")
    with pytest.raises(ValueError, match="'z'"):
        D.load_csv(p, ["z"])
    bad = write(tmp_path / "b.csv", "a,y\n1,2\n3,oops\n")
    with pytest.raises(ValueError, match="row 3, column 2"):
        D.load_csv(bad, ["y"])
    with pytest.raises(ValueError, match="empty"):
        D.load_csv(write(tmp_path / "c.csv", ""), ["y"])
    with pytest.raises(ValueError):
        D.load_csv(write(tmp_path / "d.csv", "a,y\n1\n"), ["y"])


def test_load_csv_drop_and_delimiter(tmp_path):
    p = write(tmp_path / "w.csv", '"id";"a";"q"\n1;0.5;6\n2;0.25;5\n')
    d = D.load_csv(p, ["q"], delimiter=";", drop_columns=["id"])
    assert d.feature_names == ("a",)
    assert d.features[:, 0].tolist() == [0.5, 0.25]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_csv_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 3)) * 10.0 ** rng.integers(-200, 200, size=(5, 3))
    y = rng.normal(size=(5, 2))
    d = D.Dataset(x, y, ("a", "b", "c"), ("t", "u"))
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    D.write_csv(d, p)
    back = D.load_csv(p, ["t", "u"])
    assert back.features.tobytes() == d.features.tobytes()
    assert back.targets.tobytes() == d.targets.tobytes()


def test_presets_layout(tmp_path):
    write(tmp_path / "concrete.csv", "Cement,Water,Age,Strength\n1,2,3,4\n5,6,7,8\n")
    d = D.load_preset("concrete", tmp_path)
    assert d.target_names == ("Strength",) and d.n_features == 3
    write(tmp_path / "parkinsons_updrs.data", "subject#,age,motor_UPDRS,total_UPDRS,Jitter\n1,60,10,20,0.1\n2,61,11,21,0.2\n")
    tot = D.load_preset("parkinson_total", tmp_path)
    assert tot.target_names == ("total_UPDRS",) and tot.feature_names == ("age", "Jitter")
    mot = D.load_preset("parkinson_motor", tmp_path)
    assert mot.target_names == ("motor_UPDRS",) and mot.feature_names == ("age", "Jitter")
    with pytest.raises(FileNotFoundError):
        D.load_preset("wine_quality", tmp_path)
    with pytest.raises(ValueError):
        D.load_preset("nope", tmp_path)


def toy(n, d=2):
    x = np.arange(n * d, dtype=float).reshape(n, d)
    return D.Dataset(x, np.arange(n, dtype=float))


def test_split_sizes_example():
    test, folds = D.split_and_fold(toy(10), D.SplitPlan(0.2, 2, 0))
    assert test.n == 2
    assert [v.n for _, v in folds] == [4, 4]
    assert [t.n for t, _ in folds] == [4, 4]


def test_split_rejects_tiny_folds():
    with pytest.raises(ValueError):
        D.split_and_fold(toy(6), D.SplitPlan(0.2, 5, 0))
    with pytest.raises(ValueError):
        D.SplitPlan(1.0, 5, 0)
    with pytest.raises(ValueError):
        D.SplitPlan(0.2, 1, 0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(20, 300), k=st.integers(2, 6), frac=st.floats(0.05, 0.5), seed=st.integers(0, 2**32 - 1))
def test_split_is_a_partition(n, k, frac, seed):
    d = toy(n)
    test, folds = D.split_and_fold(d, D.SplitPlan(frac, k, seed))
    ids = lambda ds: set(ds.targets[:, 0].astype(int).tolist())
    vals = [ids(v) for _, v in folds]
    assert test.n == math.ceil(frac * n)
    assert sum(len(v) for v in vals) == n - test.n
    assert set().union(*vals) == set(range(n)) - ids(test)
    for i, (tr, va) in enumerate(folds):
        assert ids(tr) == set().union(*(vals[j] for j in range(k) if j != i))
        assert not ids(tr) & ids(va)
    # determinism
    test2, _ = D.split_and_fold(d, D.SplitPlan(frac, k, seed))
    assert np.array_equal(test.targets, test2.targets)


def test_holdout_half():
    tr, ev = D.holdout_half(toy(11), 4)
    assert tr.n == 5 and ev.n == 6
    assert not set(tr.targets[:, 0]) & set(ev.targets[:, 0])


def test_standardize_uses_train_stats_only():
    rng = np.random.default_rng(0)
    train = D.Dataset(rng.normal(3, 2, size=(50, 3)), rng.normal(size=50))
    other = D.Dataset(rng.normal(5, 4, size=(30, 3)), rng.normal(size=30))
    (tr, ot), stats = D.standardize(train, [other], targets_too=True)
    assert np.all(np.abs(tr.features.mean(axis=0)) < 1e-10)
    np.testing.assert_allclose(tr.features.std(axis=0), 1.0, rtol=1e-12)
    assert np.all(np.abs(ot.features.mean(axis=0)) > 1e-3)
    np.testing.assert_allclose(stats.invert_targets(tr.targets), train.targets, rtol=1e-12)
    with pytest.raises(ValueError):
        stats.apply(tr)


def test_standardize_constant_column():
    x = np.column_stack([np.full(5, 7.0), np.arange(5.0)])
    (tr,), stats = D.standardize(D.Dataset(x, np.zeros(5)))
    assert np.all(tr.features[:, 0] == 0.0)
    assert stats.feature_std[0] == 1.0


def test_stats_json_round_trip():
    rng = np.random.default_rng(1)
    _, stats = D.standardize(D.Dataset(rng.normal(size=(8, 2)), rng.normal(size=8)), targets_too=True)
    back = D.StandardizeStats.from_json(stats.to_json())
    assert back.feature_mean.tobytes() == stats.feature_mean.tobytes()
    assert back.target_std.tobytes() == stats.target_std.tobytes()
