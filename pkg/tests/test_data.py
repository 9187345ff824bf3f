import json

import numpy as np
import pytest
from sklearn.cluster import KMeans

from bdcl import data as D
from bdcl.metrics import clustering_accuracy


def test_generator_is_deterministic():
    a = D.generate_synthetic(60, 3, [4, 5], seed=7)
    b = D.generate_synthetic(60, 3, [4, 5], seed=7)
    for x, y in zip(a.views, b.views):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_generator_small_has_both_classes():
    ds = D.generate_synthetic(10, 2, [2, 3], seed=0)
    assert set(ds.labels.tolist()) == {0, 1}
    assert ds.dims == [2, 3] and ds.n_samples == 10


def test_generator_balanced_labels():
    ds = D.generate_synthetic(100, 4, [3, 3], seed=1)
    counts = np.bincount(ds.labels)
    assert counts.max() - counts.min() <= 1


def test_noiseless_well_separated_views_are_recovered_by_kmeans():
    ds = D.generate_synthetic(200, 4, [6, 9], cluster_sep=20.0, noise=0.0, seed=3)
    for x in ds.views:
        pred = KMeans(4, n_init=10, random_state=0).fit_predict(x)
        assert clustering_accuracy(pred, ds.labels) == 1.0


@pytest.mark.parametrize("kwargs", [dict(n=5, k=3), dict(n=10, k=1), dict(n=10, k=2, view_dims=[1, 3])])
def test_generator_rejects_bad_sizes(kwargs):
    kwargs.setdefault("view_dims", [3, 3])
    with pytest.raises(D.DatasetError):
        D.generate_synthetic(**kwargs)


def test_minmax_examples():
    ds = D.MultiViewDataset([np.array([[0.0, 3.0], [5.0, 3.0], [10.0, 3.0]])])
    out = D.normalize(ds, "minmax").views[0]
    np.testing.assert_allclose(out[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(out[:, 1], 0.0)
    np.testing.assert_array_equal(D.normalize(ds, "zscore").views[0][:, 1], 0.0)


def test_zscore_moments():
    x = np.random.default_rng(0).normal(3.0, 7.0, size=(50, 6))
    out = D.normalize(D.MultiViewDataset([x]), "zscore").views[0]
    assert np.all(np.abs(out.mean(axis=0)) < 1e-10)
    assert np.all(np.abs(out.std(axis=0) - 1.0) < 1e-10)


def test_minmax_idempotent():
    x = np.random.default_rng(1).uniform(size=(20, 4))
    once = D.normalize(D.MultiViewDataset([x]), "minmax")
    twice = D.normalize(once, "minmax")
    np.testing.assert_allclose(twice.views[0], once.views[0], atol=1e-15)


def test_normalize_unknown_mode():
    with pytest.raises(D.DatasetError):
        D.normalize(D.MultiViewDataset([np.ones((2, 2))]), "l2")


def test_save_load_round_trip(tmp_path):
    ds = D.normalize(D.generate_synthetic(30, 3, [4, 6], seed=2), "zscore")
    manifest = D.save_dataset(ds, tmp_path / "ds")
    meta = json.loads(manifest.read_text())
    assert meta["n"] == 30 and meta["k"] == 3 and [v["dim"] for v in meta["views"]] == [4, 6]
    assert meta["normalization"] == "zscore" and meta["seed"] == 2
    back = D.load_dataset(manifest)
    for x, y in zip(ds.views, back.views):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(ds.labels, back.labels)


def test_load_missing_view_file(tmp_path):
    manifest = D.save_dataset(D.generate_synthetic(10, 2, [2, 2], seed=0), tmp_path)
    (tmp_path / "view1.csv").unlink()
    with pytest.raises(D.MissingViewFileError):
        D.load_dataset(manifest)


def test_load_row_count_mismatch(tmp_path):
    manifest = D.save_dataset(D.generate_synthetic(10, 2, [2, 2], seed=0), tmp_path)
    meta = json.loads(manifest.read_text())
    meta["n"] = 11
    manifest.write_text(json.dumps(meta))
    with pytest.raises(D.IntegrityError):
        D.load_dataset(manifest)


def test_load_label_out_of_range(tmp_path):
    manifest = D.save_dataset(D.generate_synthetic(10, 2, [2, 2], seed=0), tmp_path)
    labels = np.loadtxt(tmp_path / "labels.csv", dtype=int)
    labels[0] = 2
    np.savetxt(tmp_path / "labels.csv", labels, fmt="%d")
    with pytest.raises(D.LabelRangeError):
        D.load_dataset(manifest)


def test_dataset_invariants():
    with pytest.raises(D.IntegrityError):
        D.MultiViewDataset([np.ones((3, 2)), np.ones((4, 2))])
    with pytest.raises(D.LabelRangeError):
        D.MultiViewDataset([np.ones((3, 2))], labels=[0, 0, 2], n_clusters=3)
