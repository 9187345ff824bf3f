"""Two-phase training: reconstruction pretraining, then the joint clustering
objective; final label prediction and checkpoint I/O."""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .diffcore import Adam, Tensor, backward, no_grad
from .losses import LossWeights, nonfinite_components, reconstruction_loss, total_loss
from .model import ConfigError, Layer, ModelState, ViewSpec, check_views, forward_views

log = logging.getLogger(__name__)

DTYPES = {"float64": np.float64, "float32": np.float32}


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    pretrain_epochs: int = 200
    cluster_epochs: int = 300
    batch_size: int = 64
    tau: float = 0.5
    sigma: float = 0.001
    lambda1: float = 1.0
    lambda2: float = 1.0
    use_cc: bool = True
    use_fd: bool = True
    use_cd: bool = True
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    log_every: int = 50
    dtype: str = "float64"

    def __post_init__(self):
        if self.pretrain_epochs < 0 or self.cluster_epochs < 0:
            raise ConfigError("epoch counts must be non-negative")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(DTYPES)}")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        try:
            self.loss_weights
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.tau, self.sigma, self.lambda1, self.lambda2, self.use_cc, self.use_fd, self.use_cd)

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    def make_optimizer(self) -> Adam:
        return Adam(self.lr, self.beta1, self.beta2, self.eps)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _batches(n: int, batch_size: int, rng: np.random.Generator | None, drop_singleton: bool) -> list[np.ndarray]:
    order = rng.permutation(n) if rng is not None else np.arange(n)
    chunks = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if drop_singleton and len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks.pop()
    return chunks


def _check_data(model: ModelState, data) -> None:
    try:
        check_views(model, data.views)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _clear(params) -> None:
    for p in params:
        p.grad = None


def _epoch_rng(cfg: TrainConfig, phase: int, epoch: int):
    return np.random.default_rng([cfg.seed, phase, epoch]) if cfg.shuffle else None


def pretrain(model: ModelState, data, cfg: TrainConfig, on_record: Callable[[dict], None] | None = None):
    """Fit the autoencoders on reconstruction alone; heads are left untouched."""
    _check_data(model, data)
    params = model.autoencoder_parameters()
    opt = cfg.make_optimizer()
    views = [x.astype(cfg.np_dtype, copy=False) for x in data.views]
    records = []
    for epoch in range(cfg.pretrain_epochs):
        t0 = time.perf_counter()
        acc, seen = 0.0, 0
        for idx in _batches(data.n_samples, cfg.batch_size, _epoch_rng(cfg, 0, epoch), drop_singleton=False):
            xb = [x[idx] for x in views]
            x_hat = [model.decode(v, model.encode(v, x)) for v, x in enumerate(xb)]
            loss = reconstruction_loss(x_hat, xb)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(f"non-finite l_ir during pretraining epoch {epoch}")
            _clear(params)
            backward(loss)
            opt.step(params)
            acc += value * len(idx)
            seen += len(idx)
        rec = {
            "phase": "pretrain",
            "epoch": epoch,
            "l_ir": acc / seen,
            "l_ic": None,
            "l_cc": None,
            "l_p": None,
            "l_fd": None,
            "l_cd": None,
            "total": acc / seen,
            "wall_time": time.perf_counter() - t0,
        }
        records.append(rec)
        if on_record:
            on_record(rec)
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            log.info("pretrain epoch %d l_ir=%.6f", epoch + 1, rec["l_ir"])
    return model, records


def train_clustering(model: ModelState, data, cfg: TrainConfig, on_record: Callable[[dict], None] | None = None):
    """Minimize the full weighted objective over all parameters.

    Neighbor noise for step s comes from seed ``[cfg.seed, 2, s]``.
    """
    _check_data(model, data)
    if data.n_samples < 2:
        raise ConfigError("clustering needs at least two samples")
    weights = cfg.loss_weights
    params = model.parameters()
    opt = cfg.make_optimizer()
    views = [x.astype(cfg.np_dtype, copy=False) for x in data.views]
    keys = ("l_ir", "l_ic", "l_cc", "l_p", "l_fd", "l_cd", "total")
    records = []
    step = 0
    for epoch in range(cfg.cluster_epochs):
        t0 = time.perf_counter()
        sums = dict.fromkeys(keys, 0.0)
        seen = 0
        for idx in _batches(data.n_samples, cfg.batch_size, _epoch_rng(cfg, 1, epoch), drop_singleton=True):
            xb = [x[idx] for x in views]
            bundle = forward_views(model, xb, weights.sigma, [cfg.seed, 2, step])
            loss, parts = total_loss(bundle, xb, weights)
            bad = nonfinite_components(parts)
            if bad:
                raise NonFiniteLossError(f"non-finite {', '.join(bad)} at clustering epoch {epoch}, step {step}")
            _clear(params)
            backward(loss)
            opt.step(params)
            step += 1
            for k, val in parts.as_dict().items():
                sums[k] += val * len(idx)
            seen += len(idx)
        rec = {"phase": "cluster", "epoch": epoch, **{k: sums[k] / seen for k in keys}}
        rec["wall_time"] = time.perf_counter() - t0
        records.append(rec)
        if on_record:
            on_record(rec)
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            log.info("cluster epoch %d total=%.6f", epoch + 1, rec["total"])
    return model, records


def predict_assignments(model: ModelState, data) -> tuple[np.ndarray, list[np.ndarray]]:
    """Average the per-view assignments and take the argmax (lowest index on ties)."""
    _check_data(model, data)
    ps = []
    with no_grad():
        for v, x in enumerate(data.views):
            z = model.encode(v, x.astype(model.dtype, copy=False))
            ps.append(model.assign(v, z).data)
    mean = sum(ps[1:], ps[0]) / len(ps)
    return labels_from_assignments(mean), ps


def labels_from_assignments(mean_p: np.ndarray) -> np.ndarray:
    return np.argmax(np.asarray(mean_p), axis=1).astype(np.int64)


def fit(model: ModelState, data, cfg: TrainConfig, on_record=None):
    model, logs = pretrain(model, data, cfg, on_record)
    model, more = train_clustering(model, data, cfg, on_record)
    return model, logs + more


# ------------------------------------------------------------------ checkpoints

MAGIC = b"BDCL"
FORMAT_TAG = b"CKPT0001"
_HEAD = struct.Struct("<4s8sQ")


class CheckpointError(Exception):
    pass


class CheckpointNotFoundError(CheckpointError, FileNotFoundError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


def save_checkpoint(model: ModelState, cfg: TrainConfig, path) -> Path:
    """Binary container: magic, format tag, JSON header, raw little-endian
    arrays and a trailing SHA-256 of everything before it."""
    path = Path(path)
    arrays, blobs, offset = [], [], 0
    for name, p in model.named_parameters():
        raw = np.ascontiguousarray(p.data).astype(p.data.dtype.newbyteorder("<"), copy=False).tobytes()
        arrays.append({"name": name, "shape": list(p.shape), "dtype": p.data.dtype.name, "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "specs": [{"input_dim": s.input_dim, "hidden": list(s.hidden), "embed_dim": s.embed_dim} for s in model.specs],
        "contrast_dim": model.contrast_dim,
        "n_clusters": model.n_clusters,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "arrays": arrays,
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    body = _HEAD.pack(MAGIC, FORMAT_TAG, len(hbytes)) + hbytes + b"".join(blobs)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + hashlib.sha256(body).digest())
    return path


def load_checkpoint(path) -> tuple[ModelState, TrainConfig]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointNotFoundError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEAD.size:
        raise CheckpointCorruptError(f"{path}: file too short")
    magic, tag, hlen = _HEAD.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointCorruptError(f"{path}: not a checkpoint file")
    if tag != FORMAT_TAG:
        raise CheckpointVersionError(f"{path}: format {tag!r}, expected {FORMAT_TAG!r}")
    if len(blob) < _HEAD.size + 32 or hashlib.sha256(blob[:-32]).digest() != blob[-32:]:
        raise CheckpointCorruptError(f"{path}: checksum mismatch (truncated or modified)")
    try:
        header = json.loads(blob[_HEAD.size : _HEAD.size + hlen])
        payload = blob[_HEAD.size + hlen : -32]
        cfg = TrainConfig.from_dict(header["config"])
        specs = [ViewSpec(s["input_dim"], tuple(s["hidden"]), s["embed_dim"]) for s in header["specs"]]
        tensors = {}
        for a in header["arrays"]:
            chunk = payload[a["offset"] : a["offset"] + a["nbytes"]]
            arr = np.frombuffer(chunk, dtype=np.dtype(a["dtype"]).newbyteorder("<")).reshape(a["shape"])
            tensors[a["name"]] = Tensor(arr.astype(a["dtype"]), requires_grad=True)
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointCorruptError(f"{path}: malformed payload ({exc})") from exc

    def layer(prefix):
        return Layer(tensors[prefix + ".W"], tensors[prefix + ".b"])

    try:
        encoders = [[layer(f"view{v}.enc{i}") for i in range(len(s.encoder_sizes) - 1)] for v, s in enumerate(specs)]
        decoders = [[layer(f"view{v}.dec{i}") for i in range(len(s.decoder_sizes) - 1)] for v, s in enumerate(specs)]
        contrast = [layer(f"view{v}.contrast") for v in range(len(specs))]
        cluster = [layer(f"view{v}.cluster") for v in range(len(specs))]
    except KeyError as exc:
        raise CheckpointCorruptError(f"{path}: missing array {exc}") from exc
    model = ModelState(specs, header["contrast_dim"], header["n_clusters"], encoders, decoders, contrast, cluster)
    return model, cfg
