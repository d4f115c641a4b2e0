"""Random forest regression built on CART trees grown from scratch.

Each tree is grown on a bootstrap resample with ``mtry`` random split
candidates per node.  Split thresholds are midpoints of sorted unique
covariate values; ties in impurity reduction are broken by lowest covariate
index, then lowest threshold, so fits are deterministic given (data,
hyperparameters, seed).  The hot loops are numba-compiled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..data import DataError

__all__ = ["ForestParams", "ForestRule", "fit_random_forest"]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    mtry: int | None = None  # default: ceil(p / 3)
    min_leaf: int = 3
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise DataError("min_leaf must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise DataError("mtry must be >= 1")


@njit(cache=True)
def _grow_tree(X, y, mtry, min_leaf, max_depth, seed):
    np.random.seed(seed)
    n, p = X.shape

    # bootstrap resample
    rows = np.empty(n, dtype=np.int64)
    for i in range(n):
        rows[i] = np.random.randint(0, n)
    Xb = X[rows]
    yb = y[rows]

    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)

    idx = np.arange(n)
    # stack of (node_id, start, end, depth)
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0] = (0, 0, n, 0)
    top = 1
    n_nodes = 1
    feat_pool = np.empty(p, dtype=np.int64)
    chosen = np.empty(mtry, dtype=np.int64)

    while top > 0:
        top -= 1
        node, start, end, depth = stack[top]
        nn = end - start
        s = 0.0
        for i in range(start, end):
            s += yb[idx[i]]
        value[node] = s / nn

        if nn < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        # sample mtry distinct features, then visit them in index order
        for j in range(p):
            feat_pool[j] = j
        for j in range(mtry):
            r = j + np.random.randint(0, p - j)
            feat_pool[j], feat_pool[r] = feat_pool[r], feat_pool[j]
        for j in range(mtry):
            chosen[j] = feat_pool[j]
        chosen[:mtry].sort()

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        total = s
        for j in range(mtry):
            f = chosen[j]
            vals = np.empty(nn)
            ys = np.empty(nn)
            for i in range(nn):
                vals[i] = Xb[idx[start + i], f]
                ys[i] = yb[idx[start + i]]
            order = np.argsort(vals, kind="mergesort")
            cum = 0.0
            base = total * total / nn
            for i in range(nn - 1):
                cum += ys[order[i]]
                vlo = vals[order[i]]
                vhi = vals[order[i + 1]]
                if vlo >= vhi:
                    continue
                nl = i + 1
                nr = nn - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                gain = cum * cum / nl + (total - cum) * (total - cum) / nr - base
                if gain > best_gain + 1e-12 * (1.0 + abs(best_gain)):
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (vlo + vhi)
        if best_feat < 0:
            continue

        # stable in-place partition of idx[start:end] around the split
        buf = np.empty(nn, dtype=np.int64)
        nl = 0
        for i in range(start, end):
            if Xb[idx[i], best_feat] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(start, end):
            if Xb[idx[i], best_feat] > best_thr:
                buf[k] = idx[i]
                k += 1
        for i in range(nn):
            idx[start + i] = buf[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack[top] = (lid, start, start + nl, depth + 1)
        top += 1
        stack[top] = (rid, start + nl, end, depth + 1)
        top += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def _predict_tree(feature, threshold, left, right, value, X, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


class ForestRule:
    """Fitted forest; prediction is the mean of per-tree predictions."""

    kind = "random_forest"

    def __init__(self, trees, params):
        self.trees = trees
        self.params = params

    def predict(self, X, coords=None, times=None):
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        out = np.zeros(X.shape[0])
        for tr in self.trees:
            _predict_tree(*tr, X, out)
        return out / len(self.trees)


def fit_random_forest(dataset, params: ForestParams = ForestParams(), idx=None):
    """Grow a bagged ensemble of CART regression trees."""
    y = np.ascontiguousarray(dataset.obs_y(idx))
    X = np.ascontiguousarray(dataset.obs_X(idx))
    n, p = X.shape
    if n < 1:
        raise DataError("empty training set")
    mtry = params.mtry if params.mtry is not None else max(1, math.ceil(p / 3))
    mtry = min(mtry, p) if p > 0 else 1
    if p == 0:
        raise DataError("random forest needs at least one covariate")
    max_depth = -1 if params.max_depth is None else params.max_depth
    seeds = np.random.SeedSequence(params.seed).generate_state(params.n_trees)
    trees = [
        _grow_tree(X, y, mtry, params.min_leaf, max_depth, int(s) % (2**31 - 1))
        for s in seeds
    ]
    return ForestRule(trees, params)
