from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import InvalidHyperparams
from .tree import RegressionTree

log = logging.getLogger(__name__)


def weighted_median(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Column-wise weighted median of ``values`` (rounds x samples).

    Returns the smallest value whose cumulative weight reaches half the total.
    An infinite weight selects its round outright.
    """
    values = np.atleast_2d(values)
    weights = np.asarray(weights, dtype=float)
    if np.isinf(weights).any():
        return values[int(np.argmax(np.isinf(weights)))].copy()
    order = np.argsort(values, axis=0, kind="stable")
    sorted_w = weights[order]
    cum = np.cumsum(sorted_w, axis=0)
    half = 0.5 * weights.sum()
    pick = np.argmax(cum >= half, axis=0)
    cols = np.arange(values.shape[1])
    return values[order[pick, cols], cols]


class AdaBoostR2:
    """Drucker's AdaBoost.R2 with linear loss over shallow regression trees.

    Each round fits a tree to a weighted resample (with replacement) of the
    training rows. Boosting stops when the weighted average loss reaches 0.5
    (the offending round is kept only when it is the first) or when a round
    fits the training set perfectly, which then carries infinite weight.
    """

    def __init__(self, n_rounds: int = 50, max_depth: int = 3, min_leaf: int = 1, seed: int = 0):
        if n_rounds < 1:
            raise InvalidHyperparams("n_rounds must be >= 1")
        self.n_rounds, self.max_depth, self.min_leaf, self.seed = n_rounds, max_depth, min_leaf, seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(X)
        rng = np.random.default_rng(self.seed)
        w = np.full(n, 1.0 / n)
        self.estimators_, self.estimator_weights_, self.avg_losses_ = [], [], []
        self.stop_reason_ = "n_rounds"
        for t in range(self.n_rounds):
            p = w / w.sum()
            rows = rng.choice(n, size=n, replace=True, p=p)
            tree = RegressionTree(self.max_depth, self.min_leaf, 1.0, seed=t).fit(X[rows], y[rows])
            err = np.abs(tree.predict(X) - y)
            max_err = float(err.max())
            if max_err == 0.0 or not (err * p).any():
                # degenerate round: a perfect fit dominates the weighted median
                self.estimators_.append(tree)
                self.estimator_weights_.append(math.inf)
                self.avg_losses_.append(0.0)
                self.stop_reason_ = "perfect_fit"
                break
            loss = err / max_err
            avg = float(p @ loss)
            if avg >= 0.5:
                if not self.estimators_:
                    self.estimators_.append(tree)
                    self.estimator_weights_.append(1.0)
                    self.avg_losses_.append(avg)
                self.stop_reason_ = "avg_loss>=0.5"
                break
            beta = avg / (1.0 - avg)
            self.estimators_.append(tree)
            self.estimator_weights_.append(math.log(1.0 / beta))
            self.avg_losses_.append(avg)
            w = w * np.power(beta, 1.0 - loss)
        self.estimator_weights_ = np.array(self.estimator_weights_)
        log.debug("AdaBoost.R2 stopped after %d rounds (%s)", len(self.estimators_), self.stop_reason_)
        return self

    def predict(self, X) -> np.ndarray:
        preds = np.vstack([est.predict(X) for est in self.estimators_])
        if len(self.estimators_) == 1:
            return preds[0]
        return weighted_median(preds, self.estimator_weights_)
