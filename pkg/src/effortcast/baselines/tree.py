"""CART regression trees and bagged forests."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidHyperparams


class RegressionTree:
    """Greedy CART with sum-of-squared-error reduction splits.

    Candidate thresholds are midpoints between consecutive distinct values.
    Ties go to the lowest (feature index, threshold). A sample goes left when
    ``x[feature] <= threshold``. ``feature_frac < 1`` samples a feature subset
    at every node from ``seed``.
    """

    def __init__(self, max_depth: int | None = 8, min_leaf: int = 5, feature_frac: float = 1.0, seed: int = 0):
        if max_depth is not None and max_depth < 1:
            raise InvalidHyperparams("max_depth must be >= 1")
        if min_leaf < 1:
            raise InvalidHyperparams("min_leaf must be >= 1")
        if not 0.0 < feature_frac <= 1.0:
            raise InvalidHyperparams("feature_frac must lie in (0, 1]")
        self.max_depth, self.min_leaf, self.feature_frac, self.seed = max_depth, min_leaf, feature_frac, seed

    def _best_split(self, X, y, idx, features):
        yn = y[idx]
        yc = yn - yn.mean()
        total = float(yc @ yc)
        n = len(idx)
        best = (0.0, -1, 0.0)
        tol = 1e-12 * max(total, 1e-300)
        for j in features:
            xs = X[idx, j]
            order = np.argsort(xs, kind="stable")
            xs_s, ys_s = xs[order], yc[order]
            cs = np.cumsum(ys_s)[:-1]
            cs2 = np.cumsum(ys_s * ys_s)[:-1]
            nl = np.arange(1, n)
            nr = n - nl
            valid = (xs_s[:-1] < xs_s[1:]) & (nl >= self.min_leaf) & (nr >= self.min_leaf)
            if not valid.any():
                continue
            sum_all = float(ys_s.sum())
            sq_all = float(ys_s @ ys_s)
            sse_l = cs2 - cs * cs / nl
            sse_r = (sq_all - cs2) - (sum_all - cs) ** 2 / nr
            gain = np.where(valid, total - sse_l - sse_r, -np.inf)
            i = int(np.argmax(gain))
            if gain[i] > best[0] and gain[i] > tol:
                lo, hi = xs_s[i], xs_s[i + 1]
                thr = (lo + hi) / 2.0
                if not lo <= thr < hi:
                    thr = lo
                best = (float(gain[i]), int(j), float(thr))
        return best

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.seed)
        p = X.shape[1]
        m = p if self.feature_frac >= 1.0 else max(1, int(round(self.feature_frac * p)))
        self.feature_, self.threshold_, self.left_, self.right_, self.value_ = [], [], [], [], []

        def grow(idx, depth):
            node = len(self.value_)
            self.feature_.append(-1)
            self.threshold_.append(0.0)
            self.left_.append(-1)
            self.right_.append(-1)
            self.value_.append(float(y[idx].mean()))
            if (self.max_depth is not None and depth >= self.max_depth) or len(idx) < 2 * self.min_leaf:
                return node
            if np.ptp(y[idx]) == 0.0 or p == 0:
                return node
            features = range(p) if m == p else np.sort(rng.choice(p, size=m, replace=False))
            gain, j, thr = self._best_split(X, y, idx, features)
            if j < 0:
                return node
            mask = X[idx, j] <= thr
            self.feature_[node], self.threshold_[node] = j, thr
            self.left_[node] = grow(idx[mask], depth + 1)
            self.right_[node] = grow(idx[~mask], depth + 1)
            return node

        grow(np.arange(len(X)), 0)
        self.feature_ = np.array(self.feature_)
        self.threshold_ = np.array(self.threshold_)
        self.left_ = np.array(self.left_)
        self.right_ = np.array(self.right_)
        self.value_ = np.array(self.value_)
        return self

    @property
    def n_leaves(self) -> int:
        return int((self.feature_ < 0).sum())

    @property
    def depth(self) -> int:
        def d(node):
            if self.feature_[node] < 0:
                return 0
            return 1 + max(d(self.left_[node]), d(self.right_[node]))
        return d(0)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        while True:
            feat = self.feature_[node]
            internal = feat >= 0
            if not internal.any():
                break
            r = rows[internal]
            nd = node[internal]
            go_left = X[r, feat[internal]] <= self.threshold_[nd]
            node[r] = np.where(go_left, self.left_[nd], self.right_[nd])
        return self.value_[node]


class RandomForest:
    """Bagged regression trees; prediction is the arithmetic mean of the trees.

    ``bootstrap`` draws ``round(subsample * n)`` rows with replacement;
    otherwise rows are drawn without replacement (all rows, in order, when
    ``subsample == 1``).
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int | None = None,
        min_leaf: int = 2,
        feature_frac: float = 1.0 / 3.0,
        subsample: float = 1.0,
        bootstrap: bool = True,
        seed: int = 0,
    ):
        if n_trees < 1:
            raise InvalidHyperparams("n_trees must be >= 1")
        if not 0.0 < subsample <= 1.0:
            raise InvalidHyperparams("subsample must lie in (0, 1]")
        self.n_trees, self.max_depth, self.min_leaf = n_trees, max_depth, min_leaf
        self.feature_frac, self.subsample, self.bootstrap, self.seed = feature_frac, subsample, bootstrap, seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(X)
        size = max(1, int(round(self.subsample * n)))
        rng = np.random.default_rng(self.seed)
        self.trees_ = []
        for _ in range(self.n_trees):
            if self.bootstrap:
                rows = rng.integers(0, n, size=size)
            elif size < n:
                rows = np.sort(rng.choice(n, size=size, replace=False))
            else:
                rows = np.arange(n)
            tree_seed = int(rng.integers(2**32))
            tree = RegressionTree(self.max_depth, self.min_leaf, self.feature_frac, tree_seed)
            self.trees_.append(tree.fit(X[rows], y[rows]))
        return self

    def tree_predictions(self, X) -> np.ndarray:
        return np.vstack([t.predict(X) for t in self.trees_])

    def predict(self, X) -> np.ndarray:
        return self.tree_predictions(X).mean(axis=0)
