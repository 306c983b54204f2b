"""Baseline regressors written from scratch on numpy, plus shared preprocessing.

``fit_model`` is the dataset-level entry point: it fits preprocessing on the
training set, trains the requested estimator on the encoded matrix and
returns a :class:`TrainedModel` that predicts for any schema-conforming
record, including all-missing ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..dataset import Dataset, ProjectRecord
from ..errors import InvalidHyperparams
from .boosting import AdaBoostR2, weighted_median
from .elm import ELM
from .knn import KNNRegressor, MeanRegressor
from .linear import LinearRegression, LinearSVR
from .mlp import MLP
from .preprocess import PreprocessState, fit_preprocess, transform, transform_dataset
from .tree import RandomForest, RegressionTree

ESTIMATORS = {
    "mean": MeanRegressor,
    "knn": KNNRegressor,
    "linreg": LinearRegression,
    "svm": LinearSVR,
    "dt": RegressionTree,
    "rf": RandomForest,
    "abreg": AdaBoostR2,
    "elm": ELM,
    "mlp": MLP,
}

ALIASES = {"svr": "svm", "tree": "dt", "forest": "rf", "adaboost": "abreg", "lr": "linreg"}

DISPLAY_NAMES = {
    "mean": "Mean Baseline",
    "knn": "KNN Regression",
    "linreg": "Linear Regression",
    "svm": "Support Vector Machine",
    "dt": "Decision Tree",
    "rf": "Random Forest",
    "abreg": "Ada Boost Regression",
    "elm": "Extreme Learning Machine",
    "mlp": "Multi-Layer Perceptron",
}

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "mean": {},
    "knn": {"k": 5},
    "linreg": {"lam": 1e-6},
    "svm": {"C": 1.0, "epsilon": 0.1, "epochs": 200, "step": 0.01},
    "dt": {"max_depth": 8, "min_leaf": 5},
    "rf": {"n_trees": 100, "max_depth": None, "min_leaf": 2, "feature_frac": 1.0 / 3.0, "subsample": 1.0, "bootstrap": True},
    "abreg": {"n_rounds": 50, "max_depth": 3},
    "elm": {"n_hidden": 200, "activation": "sigmoid"},
    "mlp": {"n_hidden": 64, "epochs": 500, "step": 0.05},
}

SEEDED = {"svm", "dt", "rf", "abreg", "elm", "mlp"}


def canonical_kind(kind: str) -> str:
    kind = kind.strip().lower()
    kind = ALIASES.get(kind, kind)
    if kind not in ESTIMATORS:
        raise InvalidHyperparams(f"unknown estimator {kind!r}; choose from {sorted(ESTIMATORS)}")
    return kind


@dataclass(frozen=True)
class Hyperparams:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        kind = canonical_kind(self.kind)
        merged = {**DEFAULT_PARAMS[kind], **dict(self.params)}
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", merged)

    def build(self, seed: int = 0):
        kwargs = dict(self.params)
        if self.kind in SEEDED:
            kwargs.setdefault("seed", seed)
        try:
            return ESTIMATORS[self.kind](**kwargs)
        except TypeError as exc:
            raise InvalidHyperparams(f"{self.kind}: {exc}") from None


@dataclass
class TrainedModel:
    kind: str
    estimator: Any
    preprocess: PreprocessState
    train_seed: int
    hyperparams: dict

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.estimator.predict(X), dtype=float)

    def predict(self, records) -> np.ndarray:
        if isinstance(records, Dataset):
            X = transform_dataset(self.preprocess, records)
        else:
            records = list(records)
            X = np.vstack([transform(self.preprocess, r) for r in records]) if records else np.zeros((0, self.preprocess.width))
        if len(X) == 0:
            return np.zeros(0)
        return self.predict_matrix(X)

    def predict_one(self, record: ProjectRecord) -> float:
        return float(self.predict([record])[0])

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "hyperparams": {k: v for k, v in sorted(self.hyperparams.items())},
            "train_seed": self.train_seed,
            "preprocess": self.preprocess.summary(),
        }


def fit_model(train: Dataset, hyperparams: Hyperparams | str, seed: int = 0) -> TrainedModel:
    if isinstance(hyperparams, str):
        hyperparams = Hyperparams(hyperparams)
    state = fit_preprocess(train)
    X = transform_dataset(state, train)
    y = train.targets()
    est = hyperparams.build(seed).fit(X, y)
    params = dict(hyperparams.params)
    if hyperparams.kind in SEEDED:
        params.setdefault("seed", seed)
    return TrainedModel(hyperparams.kind, est, state, seed, params)


def _fitter(kind):
    def fit(train: Dataset, seed: int = 0, **params) -> TrainedModel:
        return fit_model(train, Hyperparams(kind, params), seed)
    fit.__name__ = f"fit_{kind}"
    fit.__doc__ = f"Fit the {DISPLAY_NAMES[kind]} baseline on ``train``."
    return fit


fit_knn = _fitter("knn")
fit_linreg = _fitter("linreg")
fit_svr = _fitter("svm")
fit_tree = _fitter("dt")
fit_forest = _fitter("rf")
fit_adaboost_r2 = _fitter("abreg")
fit_elm = _fitter("elm")
fit_mlp = _fitter("mlp")

__all__ = [
    "AdaBoostR2", "ELM", "KNNRegressor", "LinearRegression", "LinearSVR", "MLP", "MeanRegressor",
    "RandomForest", "RegressionTree", "Hyperparams", "TrainedModel", "PreprocessState",
    "fit_preprocess", "transform", "transform_dataset", "fit_model", "weighted_median",
    "fit_knn", "fit_linreg", "fit_svr", "fit_tree", "fit_forest", "fit_adaboost_r2", "fit_elm", "fit_mlp",
    "ESTIMATORS", "DISPLAY_NAMES", "DEFAULT_PARAMS", "canonical_kind",
]
