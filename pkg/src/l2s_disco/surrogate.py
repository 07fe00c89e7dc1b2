"""Random-forest regression surrogate over categorical structures.

Trees split on value equality (``x[f] == v`` goes left), never on integer
thresholds, because domain indices carry no order. Predictive uncertainty is
the spread of the per-tree predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba
import numpy as np

from .space import InvalidStructureError

_LEAF = -1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 20
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    # variables inspected per split; None means ceil(d / 3)
    max_features: Optional[int] = None


class SurrogatePrediction(NamedTuple):
    mean: float
    variance: float


# --------------------------------------------------------------------------- #
# numba kernels
# --------------------------------------------------------------------------- #


@numba.njit(cache=True)
def _build_tree(X, y, sample, n_values, n_sub, max_depth, min_leaf, seed):
    """Grow one tree on the rows ``sample`` (with repeats) of ``X``.

    Returns node arrays (feature, value, left, right, leaf_value, n_nodes).
    A node with feature == -1 is a leaf.
    """
    np.random.seed(seed)
    n = sample.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    value = np.zeros(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    leaf_value = np.zeros(cap, np.float64)

    work = sample.copy()
    stack_node = np.empty(cap, np.int64)
    stack_start = np.empty(cap, np.int64)
    stack_end = np.empty(cap, np.int64)
    stack_depth = np.empty(cap, np.int64)
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1
    max_k = 0
    for f in range(d):
        if n_values[f] > max_k:
            max_k = n_values[f]
    sums = np.zeros(max_k, np.float64)
    counts = np.zeros(max_k, np.int64)
    perm = np.arange(d)

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start

        total = 0.0
        lo = y[work[start]]
        hi = lo
        for t in range(start, end):
            yv = y[work[t]]
            total += yv
            if yv < lo:
                lo = yv
            if yv > hi:
                hi = yv
        if lo == hi:
            leaf_value[node] = lo
            continue
        leaf_value[node] = total / m
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        # random feature order; inspect until n_sub non-constant features are seen
        for i in range(d - 1, 0, -1):
            j = np.random.randint(0, i + 1)
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        parent_score = total * total / m
        best_gain = 1e-12 * (abs(parent_score) + 1.0)
        best_f = -1
        best_v = -1
        seen = 0
        for fi in range(d):
            if seen >= n_sub:
                break
            f = perm[fi]
            k = n_values[f]
            for v in range(k):
                sums[v] = 0.0
                counts[v] = 0
            for t in range(start, end):
                r = work[t]
                sums[X[r, f]] += y[r]
                counts[X[r, f]] += 1
            distinct = 0
            for v in range(k):
                if counts[v] > 0:
                    distinct += 1
            if distinct < 2:
                continue
            seen += 1
            for v in range(k):
                c = counts[v]
                if c < min_leaf or m - c < min_leaf:
                    continue
                s = sums[v]
                gain = s * s / c + (total - s) * (total - s) / (m - c) - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_v = v
        if best_f < 0:
            continue

        # partition work[start:end]: matches first
        i = start
        j = end - 1
        while i <= j:
            if X[work[i], best_f] == best_v:
                i += 1
            else:
                tmp = work[i]
                work[i] = work[j]
                work[j] = tmp
                j -= 1
        feature[node] = best_f
        value[node] = best_v
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_start[top] = start
        stack_end[top] = i
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = n_nodes + 1
        stack_start[top] = i
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        n_nodes += 2

    return feature, value, left, right, leaf_value, n_nodes


@numba.njit(cache=True)
def _predict_trees(X, feature, value, left, right, leaf_value):
    """Per-tree predictions, shape (n_trees, m)."""
    n_trees = feature.shape[0]
    m = X.shape[0]
    out = np.empty((n_trees, m), np.float64)
    for t in range(n_trees):
        for r in range(m):
            node = 0
            while feature[t, node] >= 0:
                if X[r, feature[t, node]] == value[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[t, r] = leaf_value[t, node]
    return out


@numba.njit(cache=True)
def _mean_var(preds):
    n_trees, m = preds.shape
    mean = np.empty(m, np.float64)
    var = np.empty(m, np.float64)
    for r in range(m):
        lo = preds[0, r]
        hi = lo
        s = 0.0
        for t in range(n_trees):
            p = preds[t, r]
            s += p
            if p < lo:
                lo = p
            if p > hi:
                hi = p
        if lo == hi:
            mean[r] = lo
            var[r] = 0.0
            continue
        mu = s / n_trees
        acc = 0.0
        for t in range(n_trees):
            diff = preds[t, r] - mu
            acc += diff * diff
        mean[r] = mu
        var[r] = acc / n_trees
    return mean, var


# --------------------------------------------------------------------------- #
# public API
# --------------------------------------------------------------------------- #


class ForestModel:
    """A fitted forest. Immutable; ``predict`` is safe to call concurrently."""

    def __init__(self, n_features, feature, value, left, right, leaf_value, seed):
        self.n_features = n_features
        self._feature = feature
        self._value = value
        self._left = left
        self._right = right
        self._leaf_value = leaf_value
        self.seed = seed

    @property
    def n_trees(self) -> int:
        return self._feature.shape[0]

    def tree_predictions(self, X) -> np.ndarray:
        X = self._as_batch(X)
        return _predict_trees(X, self._feature, self._value, self._left, self._right, self._leaf_value)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Mean and population variance of the per-tree predictions for each row of ``X``."""
        return _mean_var(self.tree_predictions(X))

    def predict_one(self, x) -> SurrogatePrediction:
        mean, var = self.predict(np.asarray(x)[None, :])
        return SurrogatePrediction(float(mean[0]), float(var[0]))

    def _as_batch(self, X):
        X = np.ascontiguousarray(X, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidStructureError(
                f"forest was fitted on {self.n_features} variables, got input of shape {X.shape}"
            )
        return X


def fit(X, y, sizes, config: ForestConfig = ForestConfig(), seed: int = 0) -> ForestModel:
    """Fit ``config.n_trees`` trees on bootstrap resamples of ``(X, y)``.

    Parameters
    ----------
    X : (n, d) int array of structures.
    y : (n,) targets.
    sizes : domain size of each variable.
    seed : controls bootstrap draws and per-node feature subsets.
    """
    X = np.ascontiguousarray(X, dtype=np.int64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("cannot fit a forest on an empty training set")
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("inputs and targets must pair up")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    n, d = X.shape
    n_values = np.asarray(sizes, dtype=np.int64)
    n_sub = config.max_features if config.max_features is not None else math.ceil(d / 3)
    max_depth = -1 if config.max_depth is None else int(config.max_depth)
    rng = np.random.default_rng(seed)
    cap = 2 * n + 1
    shape = (config.n_trees, cap)
    feature = np.full(shape, _LEAF, np.int64)
    value = np.zeros(shape, np.int64)
    left = np.full(shape, -1, np.int64)
    right = np.full(shape, -1, np.int64)
    leaf_value = np.zeros(shape, np.float64)
    for t in range(config.n_trees):
        sample = rng.integers(0, n, size=n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        f, v, lft, rgt, lv, _ = _build_tree(
            X, y, sample, n_values, n_sub, max_depth, config.min_samples_leaf, tree_seed
        )
        feature[t], value[t], left[t], right[t], leaf_value[t] = f, v, lft, rgt, lv
    return ForestModel(d, feature, value, left, right, leaf_value, seed)


def predict(model: ForestModel, x) -> SurrogatePrediction:
    return model.predict_one(x)
