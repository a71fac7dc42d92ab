"""CART trees with Gini impurity and a bootstrap-aggregated random forest.

Trees are stored as flat arrays (feature, threshold, left, right, value) so
prediction is a vectorized walk and serialization is trivial. Rows go left
when ``x[feature] <= threshold``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .base import Classifier, check_training_data

LEAF = -1


@njit(cache=True)
def _scan_split(X, order, y, w, node_of, node, rows, cols, n_classes, min_leaf):
    """Best Gini split of one node over the candidate columns.

    Rows belong to the node when ``node_of[row] == node`` (``rows`` lists them)
    and count with weight ``w[row]``. Large nodes walk the forest-wide column
    order ``order[f]``; small nodes sort their own values. Maximizes
    sum_l c^2/n_l + sum_r c^2/n_r, which minimizes weighted child impurity.
    Ties keep the earliest column, then the lowest threshold.
    """
    n = order.shape[1]
    n_rows = rows.shape[0]
    total = np.zeros(n_classes)
    m = 0.0
    for i in range(n_rows):
        r = rows[i]
        total[y[r]] += w[r]
        m += w[r]
    tot_sq = 0.0
    for k in range(n_classes):
        tot_sq += total[k] * total[k]
    small = n_rows * 8 < n
    seq = np.empty(n_rows, np.int64)
    vals = np.empty(n_rows)
    left = np.zeros(n_classes)
    best_score = -np.inf
    best_col = -1
    best_thr = 0.0
    for c in range(cols.shape[0]):
        f = cols[c]
        if small:
            for i in range(n_rows):
                vals[i] = X[rows[i], f]
            idx = np.argsort(vals)
            for i in range(n_rows):
                seq[i] = rows[idx[i]]
        else:
            j = 0
            for i in range(n):
                r = order[f, i]
                if node_of[r] == node:
                    seq[j] = r
                    j += 1
        left[:] = 0.0
        sl = 0.0
        sr = tot_sq
        nl = 0.0
        prev = 0.0
        for i in range(n_rows):
            r = seq[i]
            v = X[r, f]
            if i > 0 and v > prev and nl >= min_leaf and m - nl >= min_leaf:
                s = sl / nl + sr / (m - nl)
                if s > best_score:
                    best_score = s
                    best_col = c
                    thr = prev + (v - prev) / 2.0
                    if not (prev <= thr and thr < v):
                        thr = prev
                    best_thr = thr
            lab = y[r]
            wr = w[r]
            lv = left[lab]
            rv = total[lab] - lv
            sl += 2.0 * lv * wr + wr * wr
            sr -= 2.0 * rv * wr - wr * wr
            left[lab] = lv + wr
            nl += wr
            prev = v
    return best_col, best_thr, best_score


def best_split(X, y_idx, n_classes: int, cols=None, min_leaf: int = 1, weights=None):
    """Best Gini split of a whole data set: (column, threshold, score) or None."""
    X = np.ascontiguousarray(X, dtype=float)
    n, width = X.shape
    cols = np.arange(width) if cols is None else np.asarray(cols)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    node_of = np.where(w > 0, 0, -1).astype(np.int64)
    rows = np.nonzero(w > 0)[0]
    col, thr, score = _scan_split(
        X, order, np.asarray(y_idx, dtype=np.int64), w, node_of, 0, rows, cols.astype(np.int64), n_classes, min_leaf
    )
    if col < 0:
        return None
    return int(cols[col]), float(thr), float(score)


class DecisionTree:
    def __init__(self, max_depth: int | None = None, min_leaf: int = 1, max_features: int | None = None):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features

    def fit(self, X, y_idx, n_classes: int, rng: np.random.Generator, weights=None, order=None):
        """Grow on rows weighted by ``weights`` (bootstrap multiplicities).

        ``order`` is the column-wise argsort of X, shared across a forest.
        """
        X = np.ascontiguousarray(X, dtype=float)
        n, width = X.shape
        y_idx = np.asarray(y_idx, dtype=np.int64)
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        if order is None:
            order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
        mtry = width if self.max_features is None else min(width, self.max_features)
        node_of = np.where(w > 0, 0, -1).astype(np.int64)

        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(counts):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(counts / counts.sum())
            return len(feature) - 1

        rows = np.nonzero(w > 0)[0]
        root_counts = np.bincount(y_idx[rows], weights=w[rows], minlength=n_classes)
        stack = [(new_node(root_counts), rows, 0, root_counts)]
        while stack:
            node, rows, depth, counts = stack.pop()
            if np.count_nonzero(counts) <= 1:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if counts.sum() < 2 * self.min_leaf:
                continue
            perm = rng.permutation(width)
            split = None
            for start in range(0, width, mtry):
                cols = np.sort(perm[start : start + mtry])
                col, thr, _ = _scan_split(X, order, y_idx, w, node_of, node, rows, cols, n_classes, self.min_leaf)
                if col >= 0:
                    split = (int(cols[col]), thr)
                    break
            if split is None:
                continue
            f, thr = split
            go_left = X[rows, f] <= thr
            li, ri = rows[go_left], rows[~go_left]
            lc = np.bincount(y_idx[li], weights=w[li], minlength=n_classes)
            rc = np.bincount(y_idx[ri], weights=w[ri], minlength=n_classes)
            ln, rn = new_node(lc), new_node(rc)
            node_of[li] = ln
            node_of[ri] = rn
            feature[node], threshold[node], left[node], right[node] = f, thr, ln, rn
            stack.append((rn, ri, depth + 1, rc))
            stack.append((ln, li, depth + 1, lc))

        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.vstack(value)
        return self

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.nonzero(self.feature[node] != LEAF)[0]
        while len(active):
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


class RandomForest(Classifier):
    """Bagged CART trees with per-split feature subsampling.

    Tree ``i`` draws from ``default_rng([seed, i])``, so adding trees never
    changes the ones already grown.
    """

    kind = "forest"

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int | None = None,
        min_leaf: int = 1,
        max_features: int | str | None = "sqrt",
        bootstrap: bool = True,
        seed: int = 0,
    ):
        if n_trees < 1 or min_leaf < 1 or (max_depth is not None and max_depth < 1):
            raise ValueError("invalid forest hyperparameters")
        self.n_trees = int(n_trees)
        self.max_depth = None if max_depth is None else int(max_depth)
        self.min_leaf = int(min_leaf)
        self.max_features = max_features
        self.bootstrap = bool(bootstrap)
        self.seed = int(seed)

    def hyperparameters(self):
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
        }

    def _mtry(self, width: int) -> int:
        mf = self.max_features
        if mf is None:
            return width
        if mf == "sqrt":
            return max(1, math.ceil(math.sqrt(width)))
        return max(1, min(width, int(mf)))

    def fit(self, X, y):
        X, classes, y_idx = check_training_data(X, y)
        n, width = X.shape
        mtry = self._mtry(width)
        X = np.ascontiguousarray(X)
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
        self.trees = []
        for i in range(self.n_trees):
            rng = np.random.default_rng([self.seed, i])
            if self.bootstrap:
                weights = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
            else:
                weights = np.ones(n)
            tree = DecisionTree(self.max_depth, self.min_leaf, mtry)
            self.trees.append(tree.fit(X, y_idx, len(classes), rng, weights=weights, order=order))
        self.classes_ = classes
        self.n_features_ = width
        return self

    def _predict_proba(self, X):
        total = np.zeros((len(X), len(self.classes_)))
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)

    def parameters(self):
        counts = np.array([t.node_count for t in self.trees], dtype=np.int64)
        return {
            "node_counts": counts,
            "feature": np.concatenate([t.feature for t in self.trees]),
            "threshold": np.concatenate([t.threshold for t in self.trees]),
            "left": np.concatenate([t.left for t in self.trees]),
            "right": np.concatenate([t.right for t in self.trees]),
            "value": np.vstack([t.value for t in self.trees]),
        }

    def set_parameters(self, params):
        counts = np.asarray(params["node_counts"], dtype=np.int64)
        bounds = np.concatenate([[0], np.cumsum(counts)])
        self.trees = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            tree = DecisionTree(self.max_depth, self.min_leaf)
            tree.feature = np.asarray(params["feature"][lo:hi], dtype=np.int64)
            tree.threshold = np.asarray(params["threshold"][lo:hi], dtype=float)
            tree.left = np.asarray(params["left"][lo:hi], dtype=np.int64)
            tree.right = np.asarray(params["right"][lo:hi], dtype=np.int64)
            tree.value = np.asarray(params["value"][lo:hi], dtype=float)
            self.trees.append(tree)
