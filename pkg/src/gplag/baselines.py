"""Classical lead-lag and alignment baselines plus clustering scores.

TLCC here follows the same sign convention as the kernels: a lag ``d`` means
``y_2(t)`` is compared against ``y_1(t + d)``, so the TLCC lag of data drawn
from a GPlag kernel with lag ``s`` is ``s``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class LagScan:
    lags: np.ndarray
    correlations: np.ndarray
    best_lag: float
    best_corr: float
    pairs: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class WarpResult:
    distance: float
    path: list = None
    gamma: float = None


def _pearson(x, y):
    xc, yc = x - x.mean(), y - y.mean()
    den = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if den == 0.0:
        return -np.inf
    return float(xc @ yc) / den


def tlcc(data, lag_grid, tol=None):
    """Time-lagged cross-correlation between series 1 and series 2 of ``data``.

    For each lag ``d`` the series-2 times are moved to ``t + d`` and every
    series-1 point is paired with the nearest moved series-2 point within
    ``tol`` (default: half the median sampling step).  Lags with fewer than 3
    pairs score ``-inf``.  Ties go to the smallest lag.
    """
    lags = np.sort(np.asarray(lag_grid, dtype=float).reshape(-1))
    if lags.size == 0:
        raise ValueError("lag grid is empty")
    t1, y1 = data.times(1), data.values(1)
    t2, y2 = data.times(2), data.values(2)
    if tol is None:
        steps = np.concatenate([np.diff(t1), np.diff(t2)])
        steps = steps[steps > 0]
        tol = 0.5 * float(np.median(steps)) if steps.size else 0.0
    corr = np.full(lags.shape, -np.inf)
    npairs = np.zeros(lags.shape, dtype=int)
    order = np.argsort(t2, kind="stable")
    t2s, y2s = t2[order], y2[order]
    for i, d in enumerate(lags):
        moved = t2s + d
        j = np.clip(np.searchsorted(moved, t1), 1, len(moved) - 1)
        left, right = moved[j - 1], moved[j]
        j = np.where(np.abs(t1 - left) <= np.abs(right - t1), j - 1, j)
        ok = np.abs(moved[j] - t1) <= tol + 1e-12
        npairs[i] = int(ok.sum())
        if npairs[i] >= 3:
            corr[i] = _pearson(y1[ok], y2s[j[ok]])
    k = int(np.argmax(corr))
    return LagScan(lags, corr, float(lags[k]), float(corr[k]), npairs)


def _dtw_table(y1, y2):
    n, m = len(y1), len(y2)
    cost = (y1[:, None] - y2[None, :]) ** 2
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            D[i, j] = cost[i - 1, j - 1] + min(D[i - 1, j - 1], D[i - 1, j], D[i, j - 1])
    return D


def dtw(y1, y2):
    """Classic DTW with squared-difference cost and steps (1,1), (1,0), (0,1).

    The path lists 0-based index pairs from ``(0, 0)`` to ``(n-1, m-1)``;
    backtracking prefers the diagonal, then (1,0), then (0,1).
    """
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    y2 = np.asarray(y2, dtype=float).reshape(-1)
    if y1.size == 0 or y2.size == 0:
        raise ValueError("both sequences must be nonempty")
    D = _dtw_table(y1, y2)
    i, j = len(y1), len(y2)
    path = [(i - 1, j - 1)]
    while (i, j) != (1, 1):
        moves = ((i - 1, j - 1), (i - 1, j), (i, j - 1))
        i, j = min(moves, key=lambda ij: D[ij])  # min keeps the first of equal entries
        path.append((i - 1, j - 1))
    path.reverse()
    return WarpResult(float(D[-1, -1]), path)


def soft_dtw(y1, y2, gamma=1.0):
    """Soft-DTW value: DTW recursion with min replaced by a smoothed soft-min."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    y2 = np.asarray(y2, dtype=float).reshape(-1)
    n, m = len(y1), len(y2)
    cost = (y1[:, None] - y2[None, :]) ** 2
    R = np.full((n + 1, m + 1), np.inf)
    R[0, 0] = 0.0
    buf = np.empty(3)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            buf[0], buf[1], buf[2] = R[i - 1, j - 1], R[i - 1, j], R[i, j - 1]
            R[i, j] = cost[i - 1, j - 1] - gamma * logsumexp(-buf / gamma)
    return float(R[n, m])


def soft_dtw_divergence(y1, y2, gamma=1.0):
    """``SDTW(x, y) - (SDTW(x, x) + SDTW(y, y)) / 2``; zero when ``x == y``."""
    return soft_dtw(y1, y2, gamma) - 0.5 * (soft_dtw(y1, y1, gamma) + soft_dtw(y2, y2, gamma))


# ---------------------------------------------------------------------------
# clustering


def _lloyd(x, centers, max_iter=300):
    for _ in range(max_iter):
        labels = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        new = np.array([x[labels == c].mean() if np.any(labels == c) else centers[c]
                        for c in range(len(centers))])
        if np.array_equal(new, centers):
            break
        centers = new
    labels = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
    return labels, centers, float(((x - centers[labels]) ** 2).sum())


def kmeans(values, k, seed=0, restarts=10):
    """1-D Lloyd's k-means, best of ``restarts`` k-means++ initializations.

    Labels are 0..k-1 ordered by cluster center.
    """
    x = np.asarray(values, dtype=float).reshape(-1)
    distinct = np.unique(x)
    if k < 1 or k > distinct.size:
        raise ValueError(f"k={k} exceeds the {distinct.size} distinct values")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers = [rng.choice(distinct)]
        while len(centers) < k:
            d2 = np.min((distinct[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
            if d2.sum() == 0:
                break
            centers.append(rng.choice(distinct, p=d2 / d2.sum()))
        labels, centers, sse = _lloyd(x, np.sort(np.array(centers, dtype=float)))
        if best is None or sse < best[2] - 1e-12:
            best = (labels, centers, sse)
    labels, centers, _ = best
    rank = np.empty(len(centers), dtype=int)
    rank[np.argsort(centers, kind="stable")] = np.arange(len(centers))
    return rank[labels]


def _contingency(labels, truth):
    labels = np.asarray(labels).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if labels.shape != truth.shape:
        raise ValueError(f"length mismatch: {labels.size} vs {truth.size}")
    _, li = np.unique(labels, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    table = np.zeros((li.max() + 1, ti.max() + 1)) if labels.size else np.zeros((1, 1))
    np.add.at(table, (li, ti), 1)
    return table


def _comb2(x):
    return (x * (x - 1) / 2.0).sum()


def ari(labels, truth):
    """Adjusted Rand index.  Two identical partitions (incl. one cluster each) give 1."""
    table = _contingency(labels, truth)
    n = table.sum()
    index = _comb2(table)
    rows, cols = _comb2(table.sum(axis=1)), _comb2(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    expected = rows * cols / total if total else 0.0
    maximum = 0.5 * (rows + cols)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(labels, truth):
    """Normalized mutual information, arithmetic-mean normalization."""
    table = _contingency(labels, truth)
    n = table.sum()
    hu, hv = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if hu == 0.0 and hv == 0.0:
        return 1.0
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    return float(min(1.0, max(0.0, mi / (0.5 * (hu + hv)))))
