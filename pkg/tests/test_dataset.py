import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from featsel.correlation import pearson
from featsel.dataset import (
    DEFAULT_FEATURE_NAMES,
    Dataset,
    DatasetError,
    FeatureMask,
    SplitSpec,
    SyntheticSpec,
    apply_mask,
    kfold,
    load_csv,
    split,
    split_indices,
    standardize,
    synthesize,
    write_csv,
)

HEADER = ",".join(DEFAULT_FEATURE_NAMES) + ",label\n"


def _row(values, label):
    return ",".join(str(v) for v in values) + f",{label}\n"


@pytest.fixture
def three_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(
        HEADER
        + _row(range(10), "calm")
        + _row([v * 0.5 for v in range(10)], "stressful")
        + _row([-1.25] * 10, "calm")
    )
    return p


def test_load_csv_labels(three_rows):
    ds = load_csv(three_rows)
    assert len(ds) == 3
    assert ds.y.tolist() == [0, 1, 0]
    assert ds.feature_names == DEFAULT_FEATURE_NAMES
    np.testing.assert_array_equal(ds.X[1], np.arange(10) * 0.5)


def test_load_csv_numeric_labels(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(HEADER + _row(range(10), "1") + _row(range(10), "0"))
    assert load_csv(p).y.tolist() == [1, 0]


def test_load_csv_short_row_names_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(HEADER + _row(range(10), "calm") + _row(range(9), "calm"))
    with pytest.raises(DatasetError, match="row 2"):
        load_csv(p)


@pytest.mark.parametrize(
    "body, match",
    [
        (_row(["x"] + list(range(9)), "calm"), "row 1.*non-numeric"),
        (_row(range(10), "anxious"), "row 1.*unknown label"),
    ],
)
def test_load_csv_bad_cells(tmp_path, body, match):
    p = tmp_path / "d.csv"
    p.write_text(HEADER + body)
    with pytest.raises(DatasetError, match=match):
        load_csv(p)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


def test_csv_round_trip(tmp_path):
    ds = synthesize(SyntheticSpec(n_records=40, seed=3))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(ds, a)
    back = load_csv(a)
    assert back.equals(ds)
    write_csv(back, b)
    assert a.read_bytes() == b.read_bytes()


def test_synthesize_balance_and_shape():
    ds = synthesize(SyntheticSpec(620, 4, 6, 2.0, 0.0, seed=1))
    assert ds.X.shape == (620, 10)
    calm, stressed = ds.class_counts()
    assert abs(calm - 310) <= 1 and abs(stressed - 310) <= 1


def test_synthesize_label_noise_keeps_balance():
    calm, stressed = synthesize(SyntheticSpec(621, 4, 6, 1.0, 0.05, seed=2)).class_counts()
    assert abs(calm - stressed) <= 1


def test_synthesize_deterministic():
    spec = SyntheticSpec(seed=11)
    assert synthesize(spec).equals(synthesize(spec))
    assert not synthesize(spec).equals(synthesize(SyntheticSpec(seed=12)))


def test_synthesize_mean_gap_equals_separation():
    ds = synthesize(SyntheticSpec(20000, 4, 6, 2.0, 0.0, seed=0))
    gap = ds.X[ds.y == 1].mean(0) - ds.X[ds.y == 0].mean(0)
    assert np.linalg.norm(gap[:4]) == pytest.approx(2.0, abs=0.05)
    assert np.abs(gap[4:]).max() < 0.06


def test_synthesize_zero_separation_is_uncorrelated():
    # |r| of a truly independent feature at n=620 has sd ~0.04; 0.1 is a 2.5 sigma bound.
    worst = []
    for seed in range(50):
        ds = synthesize(SyntheticSpec(620, 4, 6, 0.0, 0.0, seed=seed))
        worst.append(max(abs(pearson(ds.X[:, j], ds.y)) for j in range(10)))
    assert np.mean(np.array(worst) < 0.1) >= 0.8


def test_synthesize_rejects_separation_without_informative():
    with pytest.raises(DatasetError):
        synthesize(SyntheticSpec(100, 0, 10, 1.0, 0.0))


def test_split_sizes_and_stratification():
    ds = synthesize(SyntheticSpec(seed=1))
    tr, te = split(ds, SplitSpec(0.7, True, 5))
    assert (len(tr), len(te)) == (434, 186)
    for part in (tr, te):
        calm, stressed = part.class_counts()
        assert abs(calm - stressed) <= 1


def test_split_partition_and_seed_dependence():
    ds = synthesize(SyntheticSpec(seed=1))
    a_tr, a_te = split_indices(ds, SplitSpec(seed=1))
    b_tr, _ = split_indices(ds, SplitSpec(seed=2))
    assert np.array_equal(np.sort(np.concatenate([a_tr, a_te])), np.arange(620))
    assert not set(a_tr) & set(a_te)
    assert len(a_tr) == len(b_tr) and not np.array_equal(a_tr, b_tr)
    c_tr, _ = split_indices(ds, SplitSpec(seed=1))
    assert np.array_equal(a_tr, c_tr)


@pytest.mark.parametrize("frac", [0.0, 1.0, 1.5])
def test_split_rejects_bad_fraction(frac):
    ds = synthesize(SyntheticSpec(n_records=20))
    with pytest.raises(DatasetError):
        split(ds, SplitSpec(frac))


def test_split_rejects_tiny_class():
    ds = Dataset(np.zeros((5, 2)), [0, 0, 0, 0, 1], ("a", "b"))
    with pytest.raises(DatasetError, match="stratification"):
        split(ds, SplitSpec())


@pytest.mark.parametrize("n, k, sizes", [(620, 5, [124] * 5), (7, 5, [2, 2, 1, 1, 1])])
def test_kfold_sizes(n, k, sizes):
    ds = synthesize(SyntheticSpec(n_records=n, seed=0))
    folds = kfold(ds, k, seed=3)
    assert sorted((len(v) for _, v in folds), reverse=True) == sizes
    union = np.sort(np.concatenate([v for _, v in folds]))
    assert np.array_equal(union, np.arange(n))
    for tr, va in folds:
        assert not set(tr) & set(va)
        assert len(tr) + len(va) == n


def test_kfold_stratified_and_errors():
    ds = synthesize(SyntheticSpec(n_records=620, seed=0))
    for _, va in kfold(ds, 5, seed=1):
        assert abs(int(ds.y[va].sum()) - 62) <= 1
    with pytest.raises(DatasetError):
        kfold(synthesize(SyntheticSpec(n_records=4)), 5)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(4, 60), k=st.integers(2, 10), seed=st.integers(0, 2**16))
def test_kfold_partition_property(n, k, seed):
    if k > n:
        return
    ds = synthesize(SyntheticSpec(n_records=n, seed=seed))
    folds = kfold(ds, k, seed)
    sizes = [len(v) for _, v in folds]
    assert max(sizes) - min(sizes) <= 1
    assert np.array_equal(np.sort(np.concatenate([v for _, v in folds])), np.arange(n))


def test_apply_mask():
    ds = synthesize(SyntheticSpec(n_records=30))
    assert apply_mask(ds, FeatureMask.full(10)).equals(ds)
    sub = apply_mask(ds, FeatureMask.from_string("0101001101"))
    assert sub.feature_names == ("rgb_2", "rgb_4", "thermal_2", "thermal_3", "thermal_5")
    np.testing.assert_array_equal(sub.X, ds.X[:, [1, 3, 6, 7, 9]])
    np.testing.assert_array_equal(sub.y, ds.y)
    with pytest.raises(DatasetError):
        apply_mask(ds, FeatureMask.from_string("0000000000"))
    with pytest.raises(DatasetError):
        apply_mask(ds, FeatureMask.from_string("101"))


def test_standardize_closed_form():
    train = Dataset(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]), [0, 1, 0], ("a", "b"))
    (out,), stats = standardize(train)
    np.testing.assert_allclose(out.X[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)
    np.testing.assert_array_equal(out.X[:, 1], [5.0, 5.0, 5.0])
    assert stats.constant == (False, True)


def test_standardize_uses_train_statistics():
    rng = np.random.default_rng(0)
    train = Dataset(rng.normal(0, 1, (200, 3)), rng.integers(0, 2, 200), ("a", "b", "c"))
    test = Dataset(rng.normal(10, 5, (50, 3)), rng.integers(0, 2, 50), ("a", "b", "c"))
    (tr, te), stats = standardize(train, [test])
    np.testing.assert_allclose(tr.X.mean(0), 0, atol=1e-9)
    np.testing.assert_allclose(tr.X.std(0), 1, atol=1e-9)
    np.testing.assert_allclose(te.X, (test.X - stats.mean) / stats.std)
    assert te.X.mean() > 5


def test_dataset_is_immutable():
    ds = synthesize(SyntheticSpec(n_records=10))
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0
