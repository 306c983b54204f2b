from __future__ import annotations

import numpy as np

from ..errors import InvalidHyperparams

ACTIVATIONS = {
    "sigmoid": lambda z: 0.5 * (1.0 + np.tanh(0.5 * z)),
    "tanh": np.tanh,
    "relu": lambda z: np.maximum(z, 0.0),
}


class ELM:
    """Extreme learning machine: fixed random hidden layer, least-squares output layer.

    Hidden weights and biases are drawn uniform in [-1, 1] from ``seed``. The
    output layer (with a bias column) is solved through an SVD pseudo-inverse
    damped by ``ridge`` relative to the largest singular value squared.
    Targets are standardized before the solve.
    """

    def __init__(self, n_hidden: int = 200, activation: str = "sigmoid", ridge: float = 1e-12, seed: int = 0):
        if n_hidden < 1:
            raise InvalidHyperparams("n_hidden must be >= 1")
        if activation not in ACTIVATIONS:
            raise InvalidHyperparams(f"unknown activation {activation!r}; choose from {sorted(ACTIVATIONS)}")
        if ridge < 0:
            raise InvalidHyperparams("ridge must be >= 0")
        self.n_hidden, self.activation, self.ridge, self.seed = n_hidden, activation, ridge, seed

    def hidden(self, X) -> np.ndarray:
        H = ACTIVATIONS[self.activation](np.asarray(X, dtype=float) @ self.W_ + self.b_)
        return np.hstack([np.ones((len(H), 1)), H])

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.seed)
        self.W_ = rng.uniform(-1.0, 1.0, size=(X.shape[1], self.n_hidden))
        self.b_ = rng.uniform(-1.0, 1.0, size=self.n_hidden)
        self.y_mean_ = float(y.mean())
        self.y_scale_ = float(y.std()) or 1.0
        ys = (y - self.y_mean_) / self.y_scale_
        U, s, Vt = np.linalg.svd(self.hidden(X), full_matrices=False)
        alpha = self.ridge * (s[0] ** 2 if len(s) else 0.0)
        keep = s > s[0] * 1e-15 if len(s) else s.astype(bool)
        inv = np.zeros_like(s)
        inv[keep] = s[keep] / (s[keep] ** 2 + alpha)
        self.beta_ = Vt.T @ (inv * (U.T @ ys))
        return self

    def predict(self, X) -> np.ndarray:
        return (self.hidden(X) @ self.beta_) * self.y_scale_ + self.y_mean_
