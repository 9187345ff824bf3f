"""Multi-view datasets: container, CSV+manifest disk format, synthetic
generator and per-feature normalization."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

MANIFEST_NAME = "manifest.json"
NORMALIZATIONS = ("none", "minmax", "zscore")


class DatasetError(ValueError):
    """Base class for dataset problems."""


class MissingViewFileError(DatasetError, FileNotFoundError):
    pass


class IntegrityError(DatasetError):
    """Row or column counts disagree with the manifest or across views."""


class LabelRangeError(DatasetError):
    pass


@dataclass
class MultiViewDataset:
    views: list[np.ndarray]
    labels: np.ndarray | None = None
    n_clusters: int = 0
    name: str = "dataset"
    normalization: str = "none"
    seed: int | None = None

    def __post_init__(self):
        self.views = [np.asarray(v, dtype=np.float64) for v in self.views]
        if not self.views:
            raise DatasetError("at least one view is required")
        n = self.views[0].shape[0]
        for i, v in enumerate(self.views):
            if v.ndim != 2:
                raise IntegrityError(f"view {i} must be 2-D, got shape {v.shape}")
            if v.shape[0] != n:
                raise IntegrityError(f"view {i} has {v.shape[0]} rows, view 0 has {n}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if self.labels.shape[0] != n:
                raise IntegrityError(f"{self.labels.shape[0]} labels for {n} samples")
            if self.n_clusters <= 0:
                self.n_clusters = int(self.labels.max()) + 1
            if self.labels.min() < 0 or self.labels.max() >= self.n_clusters:
                raise LabelRangeError(f"labels must lie in [0, {self.n_clusters})")
            missing = set(range(self.n_clusters)) - set(np.unique(self.labels).tolist())
            if missing:
                raise LabelRangeError(f"classes {sorted(missing)} have no samples")

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list[int]:
        return [v.shape[1] for v in self.views]

    def subset(self, idx) -> list[np.ndarray]:
        return [v[idx] for v in self.views]


def generate_synthetic(
    n: int,
    k: int,
    view_dims: Sequence[int],
    cluster_sep: float = 3.0,
    noise: float = 1.0,
    seed: int = 0,
    latent_dim: int = 8,
) -> MultiViewDataset:
    """Gaussian clusters in a latent space, seen through one random linear map per view.

    Labels are balanced (sample i belongs to class i mod k before a seeded
    shuffle). Latent points are center + N(0, I); view v is latent @ A_v with
    A_v ~ N(0, 1/latent_dim), plus isotropic noise of scale ``noise``.
    """
    view_dims = [int(d) for d in view_dims]
    if k < 2:
        raise DatasetError("k must be >= 2")
    if n < 2 * k:
        raise DatasetError(f"need n >= 2k samples (n={n}, k={k})")
    if not view_dims or any(d < 2 for d in view_dims):
        raise DatasetError("every view needs dimension >= 2")
    if noise < 0 or cluster_sep < 0:
        raise DatasetError("noise and cluster_sep must be non-negative")

    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, latent_dim)) * cluster_sep
    labels = rng.permutation(np.arange(n) % k)
    latent = centers[labels] + rng.standard_normal((n, latent_dim))
    views = []
    for d in view_dims:
        A = rng.standard_normal((latent_dim, d)) / np.sqrt(latent_dim)
        views.append(latent @ A + noise * rng.standard_normal((n, d)))
    return MultiViewDataset(views, labels, k, name=f"synthetic-{seed}", seed=seed)


def normalize(ds: MultiViewDataset, mode: str) -> MultiViewDataset:
    """Per-feature minmax to [0, 1] or z-score; constant columns become 0."""
    if mode not in NORMALIZATIONS:
        raise DatasetError(f"unknown normalization {mode!r}")
    if mode == "none":
        return ds
    out = []
    for x in ds.views:
        if mode == "minmax":
            lo = x.min(axis=0)
            span = x.max(axis=0) - lo
            const = span == 0
            y = (x - lo) / np.where(const, 1.0, span)
        else:
            mu = x.mean(axis=0)
            sd = x.std(axis=0)
            const = sd == 0
            y = (x - mu) / np.where(const, 1.0, sd)
        y[:, const] = 0.0
        out.append(y)
    return replace(ds, views=out, normalization=mode)


# ------------------------------------------------------------------ disk format


def _write_csv(path: Path, arr: np.ndarray, fmt: str) -> None:
    np.savetxt(path, arr, delimiter=",", fmt=fmt)


def save_dataset(ds: MultiViewDataset, directory) -> Path:
    """Write one CSV per view (17 significant digits, so values round-trip
    exactly), an optional labels CSV and the JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    views_meta = []
    for i, x in enumerate(ds.views):
        fname = f"view{i}.csv"
        _write_csv(directory / fname, x, "%.17g")
        views_meta.append({"file": fname, "dim": int(x.shape[1])})
    labels_file = None
    if ds.labels is not None:
        labels_file = "labels.csv"
        _write_csv(directory / labels_file, ds.labels.reshape(-1, 1), "%d")
    manifest = {
        "name": ds.name,
        "n": ds.n_samples,
        "k": int(ds.n_clusters),
        "views": views_meta,
        "labels_file": labels_file,
        "normalization": ds.normalization,
        "seed": ds.seed,
    }
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _read_csv(path: Path, what: str) -> np.ndarray:
    if not path.is_file():
        raise MissingViewFileError(f"{what} file not found: {path}")
    arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return arr


def load_dataset(manifest_path) -> MultiViewDataset:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingViewFileError(f"manifest not found: {manifest_path}")
    meta = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    n = int(meta["n"])
    k = int(meta["k"])
    views = []
    for i, vm in enumerate(meta["views"]):
        x = _read_csv(root / vm["file"], f"view {i}")
        if x.shape[0] != n:
            raise IntegrityError(f"view {i}: manifest says n={n}, file has {x.shape[0]} rows")
        if x.shape[1] != int(vm["dim"]):
            raise IntegrityError(f"view {i}: manifest says dim={vm['dim']}, file has {x.shape[1]} columns")
        views.append(x)
    labels = None
    if meta.get("labels_file"):
        raw = _read_csv(root / meta["labels_file"], "labels").reshape(-1)
        if raw.shape[0] != n:
            raise IntegrityError(f"labels: manifest says n={n}, file has {raw.shape[0]} rows")
        labels = raw.astype(np.int64)
        if labels.min() < 0 or labels.max() >= k:
            raise LabelRangeError(f"labels must lie in [0, {k}), found {labels.min()}..{labels.max()}")
    norm = meta.get("normalization", "none")
    if norm not in NORMALIZATIONS:
        raise DatasetError(f"unknown normalization {norm!r} in manifest")
    return MultiViewDataset(views, labels, k, name=meta.get("name", root.name), normalization=norm, seed=meta.get("seed"))
