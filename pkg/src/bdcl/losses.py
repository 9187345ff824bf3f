"""Training objectives: reconstruction, instance contrast, cluster consistency,
assignment balance and feature/cluster decoupling.

Every function takes per-view lists of tensors and returns a scalar tensor.
The sample count N of each term is the size of the batch it is evaluated on.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import diffcore as dc
from .diffcore import DimensionError, Tensor

COS_EPS = 1e-12


class LossContractError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    tau: float = 0.5
    sigma: float = 0.001
    lambda1: float = 1.0
    lambda2: float = 1.0
    # ablation masks: a disabled term is still reported but left out of the total
    use_cc: bool = True
    use_fd: bool = True
    use_cd: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise LossContractError("tau must be positive")
        if self.sigma < 0 or self.lambda1 < 0 or self.lambda2 < 0:
            raise LossContractError("sigma, lambda1 and lambda2 must be non-negative")


@dataclass
class LossBreakdown:
    l_ir: float
    l_ic: float
    l_cc: float
    l_p: float
    l_fd: float
    l_cd: float
    total: float

    def as_dict(self) -> dict:
        return asdict(self)


def _same_shapes(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise DimensionError(f"view counts differ: {len(a)} vs {len(b)}")
    for x, y in zip(a, b):
        if np.shape(getattr(x, "data", x)) != np.shape(getattr(y, "data", y)):
            raise DimensionError(f"shape mismatch {np.shape(getattr(x, 'data', x))} vs {np.shape(getattr(y, 'data', y))}")


def reconstruction_loss(x_hat: Sequence[Tensor], x: Sequence) -> Tensor:
    """(1/B) * sum over views and samples of the squared reconstruction error."""
    _same_shapes(x_hat, x)
    n = x_hat[0].shape[0]
    total = None
    for xh, xv in zip(x_hat, x):
        term = dc.square(xh - xv).sum()
        total = term if total is None else total + term
    return total * (1.0 / n)


def cosine_similarity(a, b, eps: float = COS_EPS) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a @ b / (max(np.linalg.norm(a), eps) * max(np.linalg.norm(b), eps)))


def instance_contrastive_loss(H: Sequence[Tensor], tau: float) -> Tensor:
    """Cross-view InfoNCE over ordered view pairs.

    For anchor h_i^u the positive is h_i^v; the denominator sums over j != i
    both same-view (h_j^u) and cross-view (h_j^v) similarities, so the
    positive pair itself is not in the denominator.
    """
    V = len(H)
    if V < 2:
        raise LossContractError("need at least two views")
    B = H[0].shape[0]
    if B < 2:
        raise LossContractError("need at least two samples per batch for negatives")
    _same_shapes(H, H[:1] * V)
    dtype = H[0].dtype
    # j == i is excluded from both denominator sums
    no_diag = np.where(np.eye(B, dtype=bool), -np.inf, 0.0).astype(dtype)
    inv_tau = 1.0 / tau
    hn = [dc.l2_normalize_rows(h, COS_EPS) for h in H]
    same = [(hn[u] @ hn[u].T) * inv_tau + no_diag for u in range(V)]
    total = None
    for u in range(V):
        for v in range(V):
            if u == v:
                continue
            pos = (hn[u] * hn[v]).sum(axis=1) * inv_tau
            cross = (hn[u] @ hn[v].T) * inv_tau + no_diag
            # per-anchor log-sum-exp shift; a constant, so gradients are unaffected
            shift = np.maximum(same[u].data.max(axis=1), cross.data.max(axis=1))
            col = shift[:, None]
            denom = dc.exp(same[u] - col).sum(axis=1) + dc.exp(cross - col).sum(axis=1)
            terms = (pos - shift) - dc.log(denom)
            s = terms.sum()
            total = s if total is None else total + s
    return total * (-1.0 / (2 * B))


def cluster_consistency_loss(P: Sequence[Tensor], P_neighbor: Sequence[Tensor]) -> Tensor:
    """(1/4B) * sum over ordered pairs u != v of ||p^u - p^v||^2 + ||p^u - p_nb^v||^2."""
    _same_shapes(P, P_neighbor)
    V = len(P)
    B = P[0].shape[0]
    total = None
    for u in range(V):
        for v in range(V):
            if u == v:
                continue
            s = dc.square(P[u] - P[v]).sum() + dc.square(P[u] - P_neighbor[v]).sum()
            total = s if total is None else total + s
    if total is None:
        return Tensor(np.zeros((), dtype=P[0].dtype))
    return total * (1.0 / (4 * B))


def assignment_regularizer(P: Sequence[Tensor]) -> Tensor:
    """Sum over views of the negative entropy of the batch-mean assignment."""
    total = None
    for p in P:
        s = dc.xlogx(p.mean(axis=0)).sum()
        total = s if total is None else total + s
    return total


def _decoupling(M: Sequence[Tensor]) -> Tensor:
    total = None
    for x in M:
        d = x.shape[1]
        xn = dc.l2_normalize_cols(x)
        gram = xn.T @ xn
        s = dc.square(gram - np.eye(d, dtype=x.dtype)).sum() * (1.0 / (d * d))
        total = s if total is None else total + s
    return total


def feature_decoupling_loss(Z: Sequence[Tensor]) -> Tensor:
    """Sum over views of ||Zn^T Zn - I||_F^2 / m^2, Zn = column-normalized Z."""
    return _decoupling(Z)


def cluster_decoupling_loss(P: Sequence[Tensor]) -> Tensor:
    if P[0].shape[1] < 2:
        raise LossContractError("need at least two clusters")
    return _decoupling(P)


def sample_neighbors(Z, sigma: float, seed):
    """Z + sigma * E with E ~ N(0, I) drawn from ``default_rng(seed)``.

    Works on arrays and tensors alike; sigma == 0 returns Z unchanged.
    """
    if sigma < 0:
        raise LossContractError("sigma must be non-negative")
    if sigma == 0:
        return Z
    data = Z.data if isinstance(Z, Tensor) else np.asarray(Z)
    noise = np.random.default_rng(seed).standard_normal(data.shape).astype(data.dtype, copy=False)
    return Z + sigma * noise


def total_loss(bundle, batch: Sequence, weights: LossWeights) -> tuple[Tensor, LossBreakdown]:
    """Weighted objective and its per-term values.

    Masked terms are still evaluated (and reported) but do not enter the
    returned tensor, so they contribute no gradient.
    """
    l_ir = reconstruction_loss(bundle.x_hat, batch)
    l_ic = instance_contrastive_loss(bundle.h, weights.tau)
    l_cc = cluster_consistency_loss(bundle.p, bundle.p_neighbor)
    l_p = assignment_regularizer(bundle.p)
    l_fd = feature_decoupling_loss(bundle.z)
    l_cd = cluster_decoupling_loss(bundle.p)

    total = l_ir + l_ic
    cluster_terms = [l_p] + ([l_cc] if weights.use_cc else [])
    decouple_terms = ([l_fd] if weights.use_fd else []) + ([l_cd] if weights.use_cd else [])
    if weights.lambda1 != 0:
        total = total + weights.lambda1 * sum(cluster_terms[1:], cluster_terms[0])
    if weights.lambda2 != 0 and decouple_terms:
        total = total + weights.lambda2 * sum(decouple_terms[1:], decouple_terms[0])

    vals = [t.item() for t in (l_ir, l_ic, l_cc, l_p, l_fd, l_cd, total)]
    return total, LossBreakdown(*vals)


def combine(parts: LossBreakdown, weights: LossWeights) -> float:
    """Recompute the weighted total from component values (for checks and logs)."""
    cc = parts.l_cc if weights.use_cc else 0.0
    fd = parts.l_fd if weights.use_fd else 0.0
    cd = parts.l_cd if weights.use_cd else 0.0
    return parts.l_ir + parts.l_ic + weights.lambda1 * (cc + parts.l_p) + weights.lambda2 * (fd + cd)


def nonfinite_components(parts: LossBreakdown) -> list[str]:
    """Names of non-finite components."""
    return [k for k, v in parts.as_dict().items() if not math.isfinite(v)]
