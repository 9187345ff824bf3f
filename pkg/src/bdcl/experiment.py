"""Seed-by-variant sweeps for ablation and decoupling comparisons.

Every variant of one seed starts from the same pretrained autoencoders, so
differences between variants come from the clustering phase alone.
"""

from __future__ import annotations

import copy
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.cluster import KMeans

from .config import RunConfig, build_dataset
from .metrics import clustering_accuracy, coupling_matrices, nmi, purity
from .model import init_model
from .trainer import TrainConfig, predict_assignments, pretrain, train_clustering

VARIANTS = {
    "full": {},
    "no_bd": {"use_fd": False, "use_cd": False},
    "no_fd": {"use_fd": False},
    "no_cd": {"use_cd": False},
    "no_cc": {"use_cc": False},
}


def moving_average_at(values, end: int, window: int = 20) -> float:
    """Mean of ``values[end - window:end]`` (shorter at the start)."""
    if end < 1:
        raise ValueError("end must be >= 1")
    return float(np.mean(values[max(0, end - window) : end]))


def converged(totals, window: int = 20, mark: float = 0.25) -> bool:
    """Final moving average no higher than the one at ``mark`` of the phase."""
    n = len(totals)
    return moving_average_at(totals, n, window) <= moving_average_at(totals, max(1, round(mark * n)), window)


def kmeans_per_view_acc(ds, seed: int = 0) -> float:
    """Mean ACC of k-means run separately on each raw view."""
    scores = [
        clustering_accuracy(KMeans(ds.n_clusters, n_init=10, random_state=seed).fit_predict(x), ds.labels)
        for x in ds.views
    ]
    return float(np.mean(scores))


@dataclass
class VariantRun:
    seed: int
    variant: str
    acc: float
    nmi: float
    pur: float
    z_offdiag: float
    p_offdiag: float
    converged: bool
    totals: list[float]
    seconds: float


@dataclass
class SuiteResult:
    runs: list[VariantRun] = field(default_factory=list)
    kmeans: dict[int, float] = field(default_factory=dict)
    pretrain_seconds: dict[int, float] = field(default_factory=dict)

    def get(self, variant: str) -> list[VariantRun]:
        return [r for r in self.runs if r.variant == variant]

    def mean(self, variant: str, key: str) -> float:
        return float(np.mean([getattr(r, key) for r in self.get(variant)]))

    def summary(self) -> dict[str, dict[str, float]]:
        names = list(dict.fromkeys(r.variant for r in self.runs))
        return {n: {k: self.mean(n, k) for k in ("acc", "nmi", "pur", "z_offdiag", "p_offdiag")} for n in names}

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "variant", "acc", "nmi", "pur", "z_offdiag", "p_offdiag", "converged", "kmeans_acc"])
            for r in self.runs:
                w.writerow([r.seed, r.variant, repr(r.acc), repr(r.nmi), repr(r.pur), repr(r.z_offdiag),
                            repr(r.p_offdiag), int(r.converged), repr(self.kmeans.get(r.seed))])
        return path


def run_suite(base: RunConfig, seeds, variants=tuple(VARIANTS), on_run=None) -> SuiteResult:
    result = SuiteResult()
    for seed in seeds:
        raw = base.to_dict()
        raw["train"]["seed"] = int(seed)
        cfg = RunConfig.from_dict(raw).resolved()
        ds = build_dataset(cfg)
        result.kmeans[seed] = kmeans_per_view_acc(ds)
        model0 = init_model(
            cfg.model.view_specs(ds.dims), cfg.model.contrast_dim, ds.n_clusters, seed, cfg.train.np_dtype
        )
        t0 = time.perf_counter()
        pretrain(model0, ds, cfg.train)
        result.pretrain_seconds[seed] = time.perf_counter() - t0
        for name in variants:
            tc = TrainConfig.from_dict({**cfg.train.to_dict(), **VARIANTS[name]})
            model = copy.deepcopy(model0)
            t0 = time.perf_counter()
            _, logs = train_clustering(model, ds, tc)
            pred, _ = predict_assignments(model, ds)
            coupling = coupling_matrices(model, ds)
            totals = [r["total"] for r in logs]
            run = VariantRun(
                seed=seed,
                variant=name,
                acc=clustering_accuracy(pred, ds.labels),
                nmi=nmi(pred, ds.labels),
                pur=purity(pred, ds.labels),
                z_offdiag=float(np.mean(coupling.z_offdiag)),
                p_offdiag=float(np.mean(coupling.p_offdiag)),
                converged=converged(totals) if totals else True,
                totals=totals,
                seconds=time.perf_counter() - t0,
            )
            result.runs.append(run)
            if on_run:
                on_run(run)
    return result
