from __future__ import annotations

import numpy as np

from ..errors import DivergenceDetected, InvalidHyperparams


class MLP:
    """One tanh hidden layer, linear output, mean squared loss, full-batch gradient descent.

    The loss is ``0.5 * mean((f(x) - y)**2)`` on standardized targets.
    Parameters live in one flat vector so gradients can be checked directly.
    """

    def __init__(self, n_hidden: int = 64, epochs: int = 500, step: float = 0.05, seed: int = 0):
        if n_hidden < 1:
            raise InvalidHyperparams("n_hidden must be >= 1")
        if epochs < 0 or step <= 0:
            raise InvalidHyperparams("epochs must be >= 0 and step > 0")
        self.n_hidden, self.epochs, self.step, self.seed = n_hidden, epochs, step, seed

    def _shapes(self, p):
        h = self.n_hidden
        return [(p, h), (h,), (h,), ()]

    def unpack(self, theta, p):
        out, i = [], 0
        for shape in self._shapes(p):
            size = int(np.prod(shape)) if shape else 1
            chunk = theta[i:i + size]
            out.append(chunk.reshape(shape) if shape else chunk[0])
            i += size
        return out

    def init_params(self, p: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        W1 = rng.normal(0.0, 1.0 / np.sqrt(max(p, 1)), size=(p, self.n_hidden))
        w2 = rng.normal(0.0, 1.0 / np.sqrt(self.n_hidden), size=self.n_hidden)
        return np.concatenate([W1.ravel(), np.zeros(self.n_hidden), w2, [0.0]])

    def forward(self, theta, X):
        W1, b1, w2, b2 = self.unpack(theta, X.shape[1])
        A = np.tanh(X @ W1 + b1)
        return A, A @ w2 + b2

    def loss_and_grad(self, theta, X, y):
        X = np.asarray(X, dtype=float)
        n = len(X)
        W1, b1, w2, b2 = self.unpack(theta, X.shape[1])
        A, out = self.forward(theta, X)
        r = out - y
        loss = 0.5 * float(r @ r) / n
        d_out = r / n
        g_w2 = A.T @ d_out
        g_b2 = d_out.sum()
        d_hidden = np.outer(d_out, w2) * (1.0 - A * A)
        g_W1 = X.T @ d_hidden
        g_b1 = d_hidden.sum(axis=0)
        return loss, np.concatenate([g_W1.ravel(), g_b1, g_w2, [g_b2]])

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.y_mean_ = float(y.mean())
        self.y_scale_ = float(y.std()) or 1.0
        ys = (y - self.y_mean_) / self.y_scale_
        theta = self.init_params(X.shape[1])
        self.loss_history_ = []
        for epoch in range(self.epochs):
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grad = self.loss_and_grad(theta, X, ys)
            if not np.isfinite(loss) or not np.isfinite(grad).all():
                raise DivergenceDetected(f"MLP loss became non-finite at epoch {epoch} (step={self.step})")
            self.loss_history_.append(loss)
            theta = theta - self.step * grad
        self.theta_ = theta
        return self

    def predict(self, X) -> np.ndarray:
        _, out = self.forward(self.theta_, np.asarray(X, dtype=float))
        return out * self.y_scale_ + self.y_mean_
