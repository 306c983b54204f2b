"""Ridge least squares and a linear epsilon-insensitive SVR."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import InvalidHyperparams, SingularSystem

log = logging.getLogger(__name__)


class LinearRegression:
    """Least squares with an optional ridge penalty on the slopes (never the intercept).

    Solves the normal equations. If the Gram matrix is singular and
    ``fallback`` is on, retries with ``fallback_lambda`` scaled to the Gram
    diagonal.
    """

    def __init__(self, lam: float = 1e-6, fallback: bool = True, fallback_lambda: float = 1e-6):
        if lam < 0:
            raise InvalidHyperparams("ridge lambda must be >= 0")
        self.lam = lam
        self.fallback = fallback
        self.fallback_lambda = fallback_lambda

    def _solve(self, A, b, lam):
        G = A.T @ A
        pen = np.eye(G.shape[0]) * lam
        pen[0, 0] = 0.0
        M = G + pen
        if np.linalg.matrix_rank(M) < M.shape[0]:
            raise np.linalg.LinAlgError("singular normal equations")
        return np.linalg.solve(M, A.T @ b)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        A = np.hstack([np.ones((len(X), 1)), X])
        try:
            w = self._solve(A, y, self.lam)
            self.lambda_used_ = self.lam
        except np.linalg.LinAlgError:
            if not self.fallback:
                raise SingularSystem("normal equations are singular and the ridge fallback is disabled") from None
            scale = max(float(np.mean(np.diag(A.T @ A)[1:])) if X.shape[1] else 1.0, 1.0)
            lam = max(self.lam, self.fallback_lambda * scale)
            log.info("Gram matrix singular; retrying with ridge lambda %.3g", lam)
            w = self._solve(A, y, lam)
            self.lambda_used_ = lam
        self.intercept_ = float(w[0])
        self.coef_ = w[1:]
        return self

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_


class LinearSVR:
    """Linear SVR trained by per-sample subgradient descent.

    Minimizes ``0.5*||w||^2 + C * sum(max(0, |w.x + b - y| - eps))``. Targets
    are standardized internally, so ``eps`` is in units of the target's
    standard deviation. Sample order per epoch is a seeded permutation; the
    step decays as ``step / (1 + epoch)``.
    """

    def __init__(self, C: float = 1.0, epsilon: float = 0.1, epochs: int = 200, step: float = 0.01, seed: int = 0):
        if C < 0 or epsilon < 0:
            raise InvalidHyperparams("C and epsilon must be >= 0")
        if epochs < 1 or step <= 0:
            raise InvalidHyperparams("epochs must be >= 1 and step > 0")
        self.C, self.epsilon, self.epochs, self.step, self.seed = C, epsilon, epochs, step, seed

    def objective(self, X, y_std) -> float:
        r = X @ self.w_ + self.b_ - y_std
        return 0.5 * float(self.w_ @ self.w_) + self.C * float(np.maximum(0.0, np.abs(r) - self.epsilon).sum())

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        self.y_mean_ = float(y.mean())
        self.y_scale_ = float(y.std()) or 1.0
        ys = (y - self.y_mean_) / self.y_scale_
        rng = np.random.default_rng(self.seed)
        w = np.zeros(p)
        b = 0.0
        self.loss_history_ = []
        for epoch in range(self.epochs):
            eta = self.step / (1.0 + epoch)
            for i in rng.permutation(n):
                r = X[i] @ w + b - ys[i]
                gw = w / n
                if abs(r) > self.epsilon:
                    s = self.C * np.sign(r)
                    gw = gw + s * X[i]
                    b -= eta * s
                w = w - eta * gw
            self.w_, self.b_ = w, b
            self.loss_history_.append(self.objective(X, ys))
        self.coef_ = w * self.y_scale_
        self.intercept_ = b * self.y_scale_ + self.y_mean_
        return self

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_
