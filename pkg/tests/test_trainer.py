import numpy as np
import pytest

from bdcl.data import generate_synthetic, normalize
from bdcl.model import ConfigError, ModelState, ViewSpec, init_model
from bdcl import trainer as T


def tiny_data(n=30, seed=0):
    return normalize(generate_synthetic(n, 3, [5, 4], cluster_sep=4.0, noise=0.5, seed=seed), "minmax")


def tiny_model(ds, seed=0):
    return init_model([ViewSpec(d, (8,), 6) for d in ds.dims], 3, ds.n_clusters, seed)


def weights(model):
    return {name: p.data.copy() for name, p in model.named_parameters()}


def same_weights(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def cfg(**kw):
    base = dict(pretrain_epochs=2, cluster_epochs=2, batch_size=8, log_every=0)
    return T.TrainConfig(**{**base, **kw})


def test_config_validation():
    for bad in ({"batch_size": 1}, {"pretrain_epochs": -1}, {"lr": 0.0}, {"dtype": "float16"}, {"tau": 0.0}):
        with pytest.raises(ConfigError):
            cfg(**bad)
    with pytest.raises(ConfigError):
        T.TrainConfig.from_dict({"epochs": 3})


def test_zero_epochs_is_noop():
    ds = tiny_data()
    model = tiny_model(ds)
    before = weights(model)
    _, logs = T.fit(model, ds, cfg(pretrain_epochs=0, cluster_epochs=0))
    assert logs == []
    assert same_weights(before, weights(model))


def test_linear_autoencoder_pretraining_converges():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 2)) @ rng.normal(size=(2, 4))  # rank-2 data in 4 dims
    full = init_model([ViewSpec(4, (), 4)] * 2, 2, 2, seed=0)
    single = ModelState(full.specs[:1], 2, 2, full.encoders[:1], full.decoders[:1], full.contrast_heads[:1], full.cluster_heads[:1])

    class OneView:
        views = [x]
        n_samples = 50

    _, logs = T.pretrain(single, OneView, T.TrainConfig(pretrain_epochs=200, cluster_epochs=0, lr=1e-2, log_every=0))
    assert len(logs) == 200
    assert logs[-1]["l_ir"] < 0.01 * logs[0]["l_ir"]


def test_pretrain_touches_only_autoencoders():
    ds = tiny_data()
    model = tiny_model(ds)
    heads = [p.data.copy() for p in model.head_parameters()]
    ae = [p.data.copy() for p in model.autoencoder_parameters()]
    T.pretrain(model, ds, cfg())
    assert all(np.array_equal(a, p.data) for a, p in zip(heads, model.head_parameters()))
    assert any(not np.array_equal(a, p.data) for a, p in zip(ae, model.autoencoder_parameters()))


def test_training_is_deterministic():
    ds = tiny_data()
    runs = []
    for _ in range(2):
        model, logs = T.fit(tiny_model(ds), ds, cfg())
        runs.append((weights(model), [{k: v for k, v in r.items() if k != "wall_time"} for r in logs]))
    assert same_weights(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]


def test_log_records_shape():
    ds = tiny_data()
    seen = []
    _, logs = T.fit(tiny_model(ds), ds, cfg(), on_record=seen.append)
    assert seen == logs
    assert [(r["phase"], r["epoch"]) for r in logs] == [("pretrain", 0), ("pretrain", 1), ("cluster", 0), ("cluster", 1)]
    for r in logs:
        assert set(r) == {"phase", "epoch", "l_ir", "l_ic", "l_cc", "l_p", "l_fd", "l_cd", "total", "wall_time"}
    assert logs[0]["l_ic"] is None and logs[-1]["l_ic"] is not None


def test_cluster_head_frozen_without_cluster_terms():
    # the clustering head only receives gradient from the lambda-weighted terms
    ds = tiny_data()
    model = tiny_model(ds)
    before = [(l.W.data.copy(), l.b.data.copy()) for l in model.cluster_heads]
    T.train_clustering(model, ds, cfg(lambda1=0.0, lambda2=0.0))
    for (w, b), layer in zip(before, model.cluster_heads):
        assert np.array_equal(w, layer.W.data) and np.array_equal(b, layer.b.data)


def test_decoupling_reaches_cluster_head_in_one_step():
    ds = tiny_data()
    model = tiny_model(ds)
    before = [l.W.data.copy() for l in model.cluster_heads]
    T.train_clustering(model, ds, cfg(cluster_epochs=1, batch_size=64, lambda1=0.0, lambda2=1.0))
    assert any(not np.array_equal(w, l.W.data) for w, l in zip(before, model.cluster_heads))


def test_batches_cover_every_sample_once():
    rng = np.random.default_rng(0)
    for n, b in [(30, 8), (17, 8), (16, 8), (9, 4), (2, 2)]:
        chunks = T._batches(n, b, rng, drop_singleton=False)
        assert sorted(np.concatenate(chunks).tolist()) == list(range(n))
    chunks = T._batches(17, 8, None, drop_singleton=True)
    assert [len(c) for c in chunks] == [8, 8]
    assert [len(c) for c in T._batches(18, 8, None, drop_singleton=True)] == [8, 8, 2]


def test_predict_examples():
    np.testing.assert_array_equal(T.labels_from_assignments([[0.1, 0.7, 0.2]]), [1])
    mean = (np.array([[0.6, 0.4]]) + np.array([[0.2, 0.8]])) / 2
    np.testing.assert_array_equal(T.labels_from_assignments(mean), [1])
    np.testing.assert_array_equal(T.labels_from_assignments([[0.5, 0.5]]), [0])


def test_predict_assignments_uses_view_mean():
    ds = tiny_data()
    model = tiny_model(ds)
    labels, ps = T.predict_assignments(model, ds)
    assert len(ps) == 2 and ps[0].shape == (30, 3)
    np.testing.assert_array_equal(labels, np.argmax((ps[0] + ps[1]) / 2, axis=1))


def test_nonfinite_loss_aborts_with_component_name():
    ds = tiny_data()
    model = tiny_model(ds)
    model.cluster_heads[0].W.data[:] = np.nan
    with pytest.raises(T.NonFiniteLossError, match="l_cc|l_p|l_cd"):
        T.train_clustering(model, ds, cfg())


def test_view_mismatch_is_config_error():
    ds = tiny_data()
    model = init_model([ViewSpec(5, (8,), 6), ViewSpec(3, (8,), 6)], 3, 3, 0)
    with pytest.raises(ConfigError):
        T.pretrain(model, ds, cfg())


def test_checkpoint_round_trip(tmp_path):
    ds = tiny_data()
    c = cfg(seed=7)
    model, _ = T.fit(tiny_model(ds), ds, c)
    path = T.save_checkpoint(model, c, tmp_path / "m.bin")
    loaded, c2 = T.load_checkpoint(path)
    assert c2 == c
    assert same_weights(weights(model), weights(loaded))
    assert loaded.specs == model.specs and loaded.n_clusters == 3
    # saving twice yields identical bytes
    assert T.save_checkpoint(loaded, c2, tmp_path / "m2.bin").read_bytes() == path.read_bytes()


def test_checkpoint_errors(tmp_path):
    ds = tiny_data()
    path = T.save_checkpoint(tiny_model(ds), cfg(), tmp_path / "m.bin")
    blob = path.read_bytes()

    with pytest.raises(T.CheckpointNotFoundError):
        T.load_checkpoint(tmp_path / "absent.bin")

    wrong = tmp_path / "tag.bin"
    wrong.write_bytes(blob[:4] + b"CKPT0002" + blob[12:])
    with pytest.raises(T.CheckpointVersionError):
        T.load_checkpoint(wrong)

    for cut in (5, len(blob) // 2, len(blob) - 1):
        short = tmp_path / f"cut{cut}.bin"
        short.write_bytes(blob[:cut])
        with pytest.raises(T.CheckpointCorruptError):
            T.load_checkpoint(short)

    flipped = bytearray(blob)
    flipped[len(blob) // 2] ^= 0xFF
    bad = tmp_path / "flip.bin"
    bad.write_bytes(bytes(flipped))
    with pytest.raises(T.CheckpointCorruptError):
        T.load_checkpoint(bad)

    # the three failure kinds stay distinguishable
    assert not issubclass(T.CheckpointVersionError, T.CheckpointCorruptError)
    assert not issubclass(T.CheckpointCorruptError, T.CheckpointVersionError)


def test_float32_training_runs():
    ds = tiny_data()
    c = cfg(dtype="float32")
    model = init_model([ViewSpec(d, (8,), 6) for d in ds.dims], 3, 3, 0, dtype=np.float32)
    model, logs = T.fit(model, ds, c)
    assert np.isfinite(logs[-1]["total"])
    assert model.dtype == np.float32
