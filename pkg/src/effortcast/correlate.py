"""Feature-vs-cost correlation ranking."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .dataset import MISSING, NUMERIC, Dataset
from .errors import CorrelateError, NoNumericPairs

METHOD = "pearson"


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Pearson r, or None when either input has zero variance."""
    n = len(xs)
    if n != len(ys):
        raise CorrelateError(f"length mismatch: {n} vs {len(ys)}")
    if n < 2:
        raise CorrelateError("pearson needs at least two pairs")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CorrelationEntry:
    feature: str
    r: float | None
    n_pairs: int
    level: str | None = None  # categorical features: the one-hot level that produced r


@dataclass(frozen=True)
class CorrelationReport:
    entries: tuple[CorrelationEntry, ...]
    target_name: str
    method: str = METHOD

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "r", "n_pairs"])
            for e in self.entries:
                w.writerow([e.feature, "undefined" if e.r is None else repr(e.r), e.n_pairs])


def _sort_key(e: CorrelationEntry):
    # undefined correlations sort last
    return (e.r is None, -abs(e.r) if e.r is not None else 0.0, e.feature)


def rank_features(ds: Dataset, target: str = "target_hours", k: int | None = None) -> CorrelationReport:
    """Correlate every schema feature with the target under pairwise deletion.

    Categorical features are one-hot encoded and represented by the level with
    the largest |r| (ties: level name ascending).
    """
    entries = []
    any_pairs = False
    for spec in ds.schema:
        pairs = [(r.get(spec.name), r.target_hours) for r in ds.records]
        pairs = [(v, t) for v, t in pairs if v is not MISSING and t is not None]
        n = len(pairs)
        if n >= 2:
            any_pairs = True
        if n < 2:
            entries.append(CorrelationEntry(spec.name, None, n))
            continue
        ys = [t for _, t in pairs]
        if spec.kind == NUMERIC:
            entries.append(CorrelationEntry(spec.name, pearson([v.value for v, _ in pairs], ys), n))
            continue
        best: CorrelationEntry | None = None
        for level in sorted({v.text for v, _ in pairs}):
            r = pearson([1.0 if v.text == level else 0.0 for v, _ in pairs], ys)
            if r is None:
                continue
            if best is None or abs(r) > abs(best.r):
                best = CorrelationEntry(spec.name, r, n, level)
        entries.append(best if best is not None else CorrelationEntry(spec.name, None, n))
    if not any_pairs:
        raise NoNumericPairs("no feature has at least two complete (feature, target) pairs")
    entries.sort(key=_sort_key)
    if k is not None:
        entries = entries[:k]
    return CorrelationReport(tuple(entries), target)
