"""Run configuration file: one JSON document, unknown keys rejected.

Layout::

    {
      "dataset": {"manifest": null, "normalization": "minmax",
                  "synthetic": {"n": 1000, "k": 5, "view_dims": [20, 30, 40],
                                "cluster_sep": 5.0, "noise": 6.0, "seed": null,
                                "latent_dim": 8}},
      "model": {"hidden": [128], "embed_dim": 32, "contrast_dim": 16},
      "train": {... TrainConfig fields ...},
      "out": "runs/bdcl"
    }

A null synthetic seed follows ``train.seed``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import data as D
from .data import NORMALIZATIONS
from .model import ConfigError, ViewSpec
from .trainer import TrainConfig


def _strict(cls, d: dict, where: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return d


@dataclass
class SyntheticConfig:
    n: int = 1000
    k: int = 5
    view_dims: list[int] = field(default_factory=lambda: [20, 30, 40])
    cluster_sep: float = 5.0
    noise: float = 6.0
    seed: int | None = None
    latent_dim: int = 8

    def __post_init__(self):
        if self.k < 2 or self.n < 2 * self.k:
            raise ConfigError(f"synthetic data needs k >= 2 and n >= 2k (n={self.n}, k={self.k})")
        self.view_dims = [int(d) for d in self.view_dims]


@dataclass
class DatasetConfig:
    manifest: str | None = None
    normalization: str = "minmax"
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")


@dataclass
class ModelConfig:
    hidden: list[int] = field(default_factory=lambda: [128])
    embed_dim: int = 32
    contrast_dim: int = 16

    def view_specs(self, dims) -> list[ViewSpec]:
        return [ViewSpec(int(d), tuple(self.hidden), self.embed_dim) for d in dims]


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str = "runs/bdcl"

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = _strict(cls, d, "config")
        ds = dict(_strict(DatasetConfig, d.get("dataset", {}), "dataset"))
        if "synthetic" in ds:
            ds["synthetic"] = SyntheticConfig(**_strict(SyntheticConfig, ds["synthetic"], "dataset.synthetic"))
        train = {**asdict(RunConfig().train), **_strict(TrainConfig, d.get("train", {}), "train")}
        return cls(
            dataset=DatasetConfig(**ds),
            model=ModelConfig(**_strict(ModelConfig, d.get("model", {}), "model")),
            train=TrainConfig.from_dict(train),
            out=d.get("out", cls.out),
        )

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved(self) -> RunConfig:
        """Copy with the synthetic seed filled in."""
        out = RunConfig.from_dict(json.loads(json.dumps(self.to_dict())))
        if out.dataset.synthetic.seed is None:
            out.dataset.synthetic.seed = out.train.seed
        return out


def build_dataset(cfg: RunConfig) -> D.MultiViewDataset:
    """Load the manifest or generate synthetic data, then normalize if the
    data on disk is not normalized already."""
    if cfg.dataset.manifest:
        ds = D.load_dataset(cfg.dataset.manifest)
    else:
        s = cfg.dataset.synthetic
        ds = D.generate_synthetic(s.n, s.k, s.view_dims, s.cluster_sep, s.noise, s.seed, s.latent_dim)
    if 2 * ds.n_clusters > ds.n_samples:
        raise ConfigError(f"k={ds.n_clusters} exceeds half the sample count ({ds.n_samples})")
    if ds.normalization == "none":
        ds = D.normalize(ds, cfg.dataset.normalization)
    return ds
