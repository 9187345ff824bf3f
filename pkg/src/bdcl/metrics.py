"""Clustering metrics (ACC, NMI, purity) and coupling-matrix diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diffcore import NORM_EPS, no_grad


def _check_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} predictions vs {truth.shape[0]} labels")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    if pred.min() < 0 or truth.min() < 0:
        raise ValueError("labels must be non-negative integers")
    return pred, truth


def contingency(pred, truth, size: int | None = None) -> np.ndarray:
    """Counts[c, t] of samples with predicted cluster c and true class t."""
    pred, truth = _check_pair(pred, truth)
    rows = size or int(pred.max()) + 1
    cols = size or int(truth.max()) + 1
    table = np.zeros((rows, cols), dtype=np.int64)
    np.add.at(table, (pred, truth), 1)
    return table


def hungarian_match(confusion) -> np.ndarray:
    """Permutation ``perm`` maximizing sum_c confusion[c, perm[c]]."""
    confusion = np.asarray(confusion)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {confusion.shape}")
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    perm = np.empty(confusion.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def _matching(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred, truth = _check_pair(pred, truth)
    size = max(int(pred.max()), int(truth.max())) + 1
    table = contingency(pred, truth, size)
    return table, hungarian_match(table)


def clustering_accuracy(pred, truth) -> float:
    table, perm = _matching(pred, truth)
    return float(table[np.arange(len(perm)), perm].sum()) / float(table.sum())


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies."""
    pred, truth = _check_pair(pred, truth)
    _, pred = np.unique(pred, return_inverse=True)
    _, truth = np.unique(truth, return_inverse=True)
    table = contingency(pred, truth)
    n = pred.size
    h_pred = _entropy(table.sum(axis=1), n)
    h_true = _entropy(table.sum(axis=0), n)
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    joint = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    return min(1.0, max(0.0, mi / math.sqrt(h_pred * h_true)))


def purity(pred, truth) -> float:
    table = contingency(pred, truth)
    return float(table.max(axis=1).sum()) / float(table.sum())


# ------------------------------------------------------------------ coupling


def gram_of_normalized_columns(x: np.ndarray, eps: float = NORM_EPS) -> np.ndarray:
    norm = np.sqrt((x * x).sum(axis=0, keepdims=True))
    xn = x / np.maximum(norm, eps)
    return xn.T @ xn


def mean_abs_offdiag(g: np.ndarray) -> float:
    d = g.shape[0]
    if d < 2:
        return 0.0
    mask = ~np.eye(d, dtype=bool)
    return float(np.abs(g[mask]).mean())


@dataclass
class CouplingReport:
    z: list[np.ndarray]
    p: list[np.ndarray]

    @property
    def z_offdiag(self) -> list[float]:
        return [mean_abs_offdiag(g) for g in self.z]

    @property
    def p_offdiag(self) -> list[float]:
        return [mean_abs_offdiag(g) for g in self.p]


def embed_and_assign(model, views) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Embeddings Z^v and assignments P^v for whole views, without a graph."""
    zs, ps = [], []
    with no_grad():
        for v, x in enumerate(views):
            z = model.encode(v, x.astype(model.dtype, copy=False))
            zs.append(z.data)
            ps.append(model.assign(v, z).data)
    return zs, ps


def coupling_matrices(model, data) -> CouplingReport:
    """Column-normalized Gram matrices of embeddings and assignments per view."""
    zs, ps = embed_and_assign(model, data.views)
    return CouplingReport([gram_of_normalized_columns(z) for z in zs], [gram_of_normalized_columns(p) for p in ps])


@dataclass
class MetricsReport:
    acc: float | None = None
    nmi: float | None = None
    pur: float | None = None
    matching: dict[int, int] = field(default_factory=dict)
    coupling_z_offdiag: list[float] = field(default_factory=list)
    coupling_p_offdiag: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "acc": self.acc,
            "nmi": self.nmi,
            "pur": self.pur,
            "matching": {str(k): v for k, v in self.matching.items()},
            "coupling_z_offdiag": self.coupling_z_offdiag,
            "coupling_p_offdiag": self.coupling_p_offdiag,
            "coupling_z_offdiag_mean": float(np.mean(self.coupling_z_offdiag)) if self.coupling_z_offdiag else None,
            "coupling_p_offdiag_mean": float(np.mean(self.coupling_p_offdiag)) if self.coupling_p_offdiag else None,
        }


def evaluate_labels(pred, truth) -> MetricsReport:
    _, perm = _matching(pred, truth)
    used = set(np.unique(pred).tolist())
    return MetricsReport(
        acc=clustering_accuracy(pred, truth),
        nmi=nmi(pred, truth),
        pur=purity(pred, truth),
        matching={int(c): int(perm[c]) for c in sorted(used)},
    )
