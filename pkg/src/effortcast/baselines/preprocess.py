"""Imputation, standardization and one-hot encoding fitted on training data only."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..dataset import MISSING, NUMERIC, Dataset, ProjectRecord
from ..errors import EmptyTrainingSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NumericColumn:
    name: str
    mean: float
    std: float
    impute_value: float


@dataclass(frozen=True)
class CategoricalColumn:
    name: str
    levels: tuple[str, ...]
    impute_level: str


@dataclass(frozen=True)
class PreprocessState:
    numeric: tuple[NumericColumn, ...]
    categorical: tuple[CategoricalColumn, ...]
    dropped: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        return len(self.numeric) + sum(len(c.levels) for c in self.categorical)

    def column_names(self) -> list[str]:
        names = [c.name for c in self.numeric]
        for c in self.categorical:
            names.extend(f"{c.name}={lvl}" for lvl in c.levels)
        return names

    def summary(self) -> dict:
        return {
            "numeric": [c.name for c in self.numeric],
            "categorical": {c.name: len(c.levels) for c in self.categorical},
            "dropped": list(self.dropped),
            "width": self.width,
        }


def fit_preprocess(train: Dataset) -> PreprocessState:
    """Mean/std after mean-imputation for numerics; sorted levels and mode for categoricals.

    Numeric columns with zero spread and categoricals never observed in
    training are dropped with a warning.
    """
    if len(train) == 0:
        raise EmptyTrainingSet("cannot fit preprocessing on an empty training set")
    numeric, categorical, dropped = [], [], []
    for spec in train.schema:
        values = [r.get(spec.name) for r in train.records]
        observed = [v for v in values if v is not MISSING]
        if spec.kind == NUMERIC:
            if not observed:
                dropped.append(spec.name)
                continue
            obs = np.array([v.value for v in observed], dtype=float)
            fill = float(obs.mean())
            col = np.array([fill if v is MISSING else v.value for v in values], dtype=float)
            mean, std = float(col.mean()), float(col.std())
            if not std > 0:
                dropped.append(spec.name)
                continue
            numeric.append(NumericColumn(spec.name, mean, std, fill))
        else:
            if not observed:
                dropped.append(spec.name)
                continue
            counts = Counter(v.text for v in observed)
            levels = tuple(sorted(counts))
            mode = min(levels, key=lambda lvl: (-counts[lvl], lvl))
            categorical.append(CategoricalColumn(spec.name, levels, mode))
    if dropped:
        log.warning("preprocessing dropped degenerate features: %s", ", ".join(dropped))
    return PreprocessState(tuple(numeric), tuple(categorical), tuple(dropped))


def transform(state: PreprocessState, record: ProjectRecord) -> np.ndarray:
    out = np.zeros(state.width)
    for j, col in enumerate(state.numeric):
        v = record.get(col.name)
        x = col.impute_value if v is MISSING else float(v.value)
        out[j] = (x - col.mean) / col.std
    offset = len(state.numeric)
    for col in state.categorical:
        v = record.get(col.name)
        level = col.impute_level if v is MISSING else v.text
        if level in col.levels:
            out[offset + col.levels.index(level)] = 1.0
        offset += len(col.levels)
    return out


def transform_dataset(state: PreprocessState, ds: Dataset) -> np.ndarray:
    if len(ds) == 0:
        return np.zeros((0, state.width))
    return np.vstack([transform(state, r) for r in ds.records])
