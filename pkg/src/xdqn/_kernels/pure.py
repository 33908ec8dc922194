"""Pure-numpy kernels: reference implementations of the hot inner loops.

Semantics here are the contract; the compiled module in ``_native.pyx``
mirrors them. Selection happens in ``__init__``.
"""
from __future__ import annotations

import numpy as np


def best_split(x, y):
    """Exact squared-error split search over one node's samples.

    ``x`` is (n, d) float64, ``y`` (n,) float64. Candidates are midpoints
    between consecutive distinct sorted values of each feature. Returns
    ``(feature, threshold, children_sse)`` minimizing the summed child SSE,
    scanning features in ascending index and thresholds in ascending value so
    ties resolve to the first candidate; ``feature == -1`` when no candidate
    exists.
    """
    n, d = x.shape
    best_f, best_thr, best_sse = -1, 0.0, np.inf
    if n < 2:
        return best_f, best_thr, best_sse
    for f in range(d):
        xf = x[:, f]
        order = np.argsort(xf, kind="stable")
        xs = xf[order]
        ys = y[order]
        cum = np.cumsum(ys)
        cumsq = np.cumsum(ys * ys)
        total, total_sq = cum[-1], cumsq[-1]
        k = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        k = k[valid]
        left_sum, left_sq = cum[k - 1], cumsq[k - 1]
        sse = (left_sq - left_sum * left_sum / k) + (
            (total_sq - left_sq) - (total - left_sum) * (total - left_sum) / (n - k)
        )
        j = int(np.argmin(sse))
        if sse[j] < best_sse:
            best_sse = float(sse[j])
            best_f = f
            best_thr = float((xs[k[j] - 1] + xs[k[j]]) / 2.0)
    return best_f, best_thr, best_sse


def tree_apply(feature, threshold, left, right, x):
    """Route rows of ``x`` through one tree; returns leaf node indices.

    ``feature[i] == -1`` marks leaves; ties (value equal to the threshold)
    go left.
    """
    n = x.shape[0]
    idx = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for _ in range(len(feature)):
        f = feature[idx]
        active = f >= 0
        if not active.any():
            break
        ai = idx[active]
        xi = x[rows[active], f[active]]
        idx[active] = np.where(xi <= threshold[ai], left[ai], right[ai])
    return idx


def forest_apply(features, thresholds, lefts, rights, values, x):
    """Sum of leaf values over all trees of a padded forest for each row.

    Forest arrays are (n_trees, max_nodes); row 0 of each tree is its root.
    """
    n = x.shape[0]
    n_trees, max_nodes = features.shape
    if n_trees == 0 or n == 0:
        return np.zeros(n)
    idx = np.zeros((n, n_trees), dtype=np.int64)
    trees = np.broadcast_to(np.arange(n_trees)[None, :], (n, n_trees))
    rows = np.broadcast_to(np.arange(n)[:, None], (n, n_trees))
    for _ in range(max_nodes):
        f = features[trees, idx]
        active = f >= 0
        if not active.any():
            break
        ti = trees[active]
        ai = idx[active]
        xi = x[rows[active], f[active]]
        idx[active] = np.where(
            xi <= thresholds[ti, ai], lefts[ti, ai], rights[ti, ai]
        )
    return values[trees, idx].sum(axis=1)


def sumtree_set(sums, maxs, capacity, leaf, value):
    """Set one leaf's priority and repair sum/max along the path to the root."""
    i = capacity + leaf
    sums[i] = value
    maxs[i] = value
    i >>= 1
    while i >= 1:
        sums[i] = sums[2 * i] + sums[2 * i + 1]
        m = maxs[2 * i]
        r = maxs[2 * i + 1]
        maxs[i] = m if m >= r else r
        i >>= 1


def sumtree_find(sums, capacity, targets):
    """Descend the sum-tree for each target mass in [0, total); returns leaf slots."""
    out = np.empty(len(targets), dtype=np.int64)
    for j, t in enumerate(targets):
        i = 1
        while i < capacity:
            l = 2 * i
            if t < sums[l]:
                i = l
            else:
                t -= sums[l]
                i = l + 1
        out[j] = i - capacity
    return out
