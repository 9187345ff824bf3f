"""Slow, independent reference computations used as test oracles.

Everything here works on plain Python floats / nested loops (or mpmath)
and deliberately shares no code with the package under test.
"""

import itertools
import math

import mpmath
import numpy as np

mpmath.mp.dps = 40


def matmul_loop(x, W, b=None):
    rows, inner, cols = len(x), len(W), len(W[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            out[i][j] = math.fsum(x[i][k] * W[k][j] for k in range(inner)) + (b[j] if b is not None else 0.0)
    return np.array(out)


def softmax_mp(row):
    ex = [mpmath.exp(mpmath.mpf(float(v))) for v in row]
    s = mpmath.fsum(ex)
    return [float(e / s) for e in ex]


def _norm(v):
    return math.sqrt(math.fsum(t * t for t in v))


def cosine(a, b):
    return math.fsum(x * y for x, y in zip(a, b)) / (max(_norm(a), 1e-12) * max(_norm(b), 1e-12))


def recon_oracle(xs, xhs):
    n = len(xs[0])
    total = []
    for x, xh in zip(xs, xhs):
        for i in range(n):
            for k in range(len(x[i])):
                total.append((x[i][k] - xh[i][k]) ** 2)
    return math.fsum(total) / n


def contrastive_oracle(H, tau):
    """Term-by-term enumeration over (u, v, i, j), extended precision."""
    V, B = len(H), len(H[0])
    total = mpmath.mpf(0)
    for u in range(V):
        for v in range(V):
            if u == v:
                continue
            for i in range(B):
                num = mpmath.exp(mpmath.mpf(cosine(H[u][i], H[v][i])) / tau)
                den = mpmath.mpf(0)
                for j in range(B):
                    if j == i:
                        continue
                    den += mpmath.exp(mpmath.mpf(cosine(H[u][i], H[u][j])) / tau)
                    den += mpmath.exp(mpmath.mpf(cosine(H[u][i], H[v][j])) / tau)
                total += mpmath.log(num / den)
    return float(-total / (2 * B))


def consistency_oracle(P, PN):
    V, B = len(P), len(P[0])
    terms = []
    for u in range(V):
        for v in range(V):
            if u == v:
                continue
            for i in range(B):
                for k in range(len(P[u][i])):
                    terms.append((P[u][i][k] - P[v][i][k]) ** 2)
                    terms.append((P[u][i][k] - PN[v][i][k]) ** 2)
    return math.fsum(terms) / (4 * B)


def regularizer_oracle(P):
    total = mpmath.mpf(0)
    for p in P:
        B, K = len(p), len(p[0])
        for j in range(K):
            mean = mpmath.fsum(mpmath.mpf(float(p[i][j])) for i in range(B)) / B
            if mean > 0:
                total += mean * mpmath.log(mean)
    return float(total)


def decoupling_oracle(M):
    total = []
    for x in M:
        B, d = len(x), len(x[0])
        cols = [[x[i][c] for i in range(B)] for c in range(d)]
        norms = [max(_norm(c), 1e-12) for c in cols]
        acc = []
        for a in range(d):
            for b in range(d):
                g = math.fsum(cols[a][i] * cols[b][i] for i in range(B)) / (norms[a] * norms[b])
                acc.append((g - (1.0 if a == b else 0.0)) ** 2)
        total.append(math.fsum(acc) / (d * d))
    return math.fsum(total)


def best_match_count(pred, truth):
    """Exhaustive search over all bijections between label ids."""
    pred, truth = list(pred), list(truth)
    d = max(max(pred), max(truth)) + 1
    best = 0
    for perm in itertools.permutations(range(d)):
        best = max(best, sum(1 for p, t in zip(pred, truth) if perm[p] == t))
    return best


def nmi_oracle(pred, truth):
    n = len(pred)
    cs, ts = sorted(set(pred)), sorted(set(truth))
    pc = {c: mpmath.mpf(sum(1 for p in pred if p == c)) / n for c in cs}
    pt = {t: mpmath.mpf(sum(1 for x in truth if x == t)) / n for t in ts}
    hc = -mpmath.fsum(p * mpmath.log(p) for p in pc.values())
    ht = -mpmath.fsum(p * mpmath.log(p) for p in pt.values())
    mi = mpmath.mpf(0)
    for c in cs:
        for t in ts:
            joint = mpmath.mpf(sum(1 for p, x in zip(pred, truth) if p == c and x == t)) / n
            if joint > 0:
                mi += joint * mpmath.log(joint / (pc[c] * pt[t]))
    if hc == 0 and ht == 0:
        return 1.0
    if hc == 0 or ht == 0:
        return 0.0
    return float(mi / mpmath.sqrt(hc * ht))


def purity_oracle(pred, truth):
    total = 0
    for c in set(pred):
        members = [t for p, t in zip(pred, truth) if p == c]
        total += max(members.count(t) for t in set(members))
    return total / len(pred)


def adam_reference(theta, grad_fn, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar-by-scalar Adam recurrence; returns the trajectory."""
    theta = [float(t) for t in theta]
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    path = []
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        for k in range(len(theta)):
            m[k] = b1 * m[k] + (1 - b1) * g[k]
            v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k]
            mhat = m[k] / (1 - b1**t)
            vhat = v[k] / (1 - b2**t)
            theta[k] -= lr * mhat / (math.sqrt(vhat) + eps)
        path.append(list(theta))
    return path


def central_difference(f, arrays, step=1e-5):
    """d f / d a for every array in ``arrays`` (perturbed in place).

    ``f`` may return a scalar or a 1-D vector of outputs; the result for
    each array then has shape ``a.shape + out.shape``.
    """
    grads = []
    for a in arrays:
        g = None
        for idx in np.ndindex(*a.shape):
            orig = a[idx]
            a[idx] = orig + step
            fp = np.asarray(f(), dtype=float)
            a[idx] = orig - step
            fm = np.asarray(f(), dtype=float)
            a[idx] = orig
            if g is None:
                g = np.zeros(a.shape + fp.shape)
            g[idx] = (fp - fm) / (2 * step)
        grads.append(g)
    return grads


def rel_error(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))
