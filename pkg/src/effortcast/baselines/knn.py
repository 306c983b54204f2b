from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidHyperparams, KExceedsTrainingSize


class KNNRegressor:
    """Unweighted k-nearest-neighbour regression on Euclidean distance.

    Distance ties go to the earlier training row (stable sort). Neighbour
    targets are summed with ``math.fsum`` in training order, so ``k == n``
    reproduces the global mean bit-for-bit.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise InvalidHyperparams(f"k must be >= 1, got {k}")
        self.k = k

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.k > len(X):
            raise KExceedsTrainingSize(f"k={self.k} exceeds the {len(X)} training rows")
        self.X_, self.y_ = X, y
        return self

    def neighbors(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        d2 = ((X[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def predict(self, X) -> np.ndarray:
        nn = self.neighbors(X)
        return np.array([math.fsum(self.y_[np.sort(row)]) / self.k for row in nn])


class MeanRegressor:
    """Predicts the training-target mean everywhere."""

    def fit(self, X, y):
        y = np.asarray(y, dtype=float)
        self.mean_ = math.fsum(y) / len(y)
        return self

    def predict(self, X) -> np.ndarray:
        return np.full(len(X), self.mean_)
