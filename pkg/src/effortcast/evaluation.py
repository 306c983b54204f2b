"""MAE/RMSE metrics, outlier filtering, per-estimator reports and comparison tables."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .errors import EmptyPredictionSet, EvaluationError, TooFewPoints

log = logging.getLogger(__name__)

REFERENCE_LABEL = "paper-reported, not locally reproduced"
OUTLIER_RULES = ("iqr-iterated", "iqr", "none")
DEFAULT_OUTLIER_RULE = "iqr-iterated"


@dataclass(frozen=True)
class PredictionSet:
    """Scored (id, actual, predicted) triples plus ids excluded from scoring."""

    pairs: tuple[tuple[str, float, float], ...]
    excluded: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((str(i), float(a), float(p)) for i, a, p in self.pairs))
        object.__setattr__(self, "excluded", tuple((str(i), str(r)) for i, r in self.excluded))
        overlap = {i for i, _, _ in self.pairs} & {i for i, _ in self.excluded}
        if overlap:
            raise EvaluationError(f"ids both scored and excluded: {sorted(overlap)[:5]}")

    @classmethod
    def from_arrays(cls, actual: Sequence[float], predicted: Sequence[float], ids: Sequence[str] | None = None) -> "PredictionSet":
        if len(actual) != len(predicted):
            raise EvaluationError(f"length mismatch: {len(actual)} actual vs {len(predicted)} predicted")
        ids = [str(i) for i in range(len(actual))] if ids is None else ids
        return cls(tuple(zip(ids, actual, predicted)))

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def actual(self) -> np.ndarray:
        return np.array([a for _, a, _ in self.pairs], dtype=float)

    @property
    def predicted(self) -> np.ndarray:
        return np.array([p for _, _, p in self.pairs], dtype=float)

    def errors(self) -> np.ndarray:
        return self.actual - self.predicted


def _abs_errors(ps) -> np.ndarray:
    if isinstance(ps, PredictionSet):
        if len(ps) == 0:
            raise EmptyPredictionSet("no scored pairs")
        return np.abs(ps.errors())
    actual, predicted = ps
    if len(actual) == 0:
        raise EmptyPredictionSet("no scored pairs")
    return np.abs(np.asarray(actual, dtype=float) - np.asarray(predicted, dtype=float))


def mae(ps: PredictionSet | tuple[Sequence[float], Sequence[float]]) -> float:
    """Mean absolute error: (1/n) * sum |actual - predicted|."""
    e = _abs_errors(ps)
    if np.all(e == e[0]):
        return float(e[0])
    return math.fsum(e.tolist()) / len(e)


def rmse(ps: PredictionSet | tuple[Sequence[float], Sequence[float]]) -> float:
    """Root mean squared error: sqrt((1/n) * sum (actual - predicted)^2)."""
    e = _abs_errors(ps)
    if np.all(e == e[0]):
        return float(e[0])
    value = math.sqrt(math.fsum((e * e).tolist()) / len(e))
    # rmse >= mae holds exactly; keep rounding noise from inverting it
    return max(value, math.fsum(e.tolist()) / len(e))


@dataclass(frozen=True)
class OutlierResult:
    kept: PredictionSet
    dropped_ids: tuple[str, ...]
    rule: str
    fence: tuple[float, float] | None
    passes: int = 1

    def describe(self) -> str:
        if self.rule == "none":
            return "none"
        lo, hi = self.fence if self.fence else (float("nan"), float("nan"))
        return f"{self.rule} k=1.5 on actuals, fence=[{lo!r}, {hi!r}], dropped={len(self.dropped_ids)}"


def iqr_fence(values: Sequence[float], k: float = 1.5) -> tuple[float, float]:
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25.0, 75.0])
    iqr = q3 - q1
    return float(q1 - k * iqr), float(q3 + k * iqr)


def remove_outliers(ps: PredictionSet, rule: str = DEFAULT_OUTLIER_RULE, k: float = 1.5) -> OutlierResult:
    """Drop pairs whose actual value falls outside the Tukey fence of the actuals.

    ``iqr`` applies the fence once. ``iqr-iterated`` (default) re-applies it
    to the survivors until nothing more is dropped or fewer than four points
    remain, which makes the rule idempotent.
    """
    if rule not in OUTLIER_RULES:
        raise EvaluationError(f"unknown outlier rule {rule!r}; choose from {OUTLIER_RULES}")
    if rule == "none":
        return OutlierResult(ps, (), rule, None, 0)
    if len(ps) < 4:
        raise TooFewPoints(f"outlier rule needs at least 4 points, got {len(ps)}")
    pairs = list(ps.pairs)
    dropped: list[str] = []
    passes = 0
    fence = None
    while len(pairs) >= 4:
        fence = iqr_fence([a for _, a, _ in pairs], k)
        lo, hi = fence
        keep = [t for t in pairs if lo <= t[1] <= hi]
        passes += 1
        dropped.extend(t[0] for t in pairs if not lo <= t[1] <= hi)
        changed = len(keep) != len(pairs)
        pairs = keep
        if rule == "iqr" or not changed:
            break
    return OutlierResult(PredictionSet(tuple(pairs), ps.excluded), tuple(dropped), rule, fence, passes)


@dataclass
class EvaluationReport:
    estimator: str
    dataset: str
    n: int
    mae: float
    rmse: float
    seed: int | None = None
    excluded: int = 0
    hyperparams: dict = field(default_factory=dict)
    predictions: PredictionSet | None = None
    outliers: OutlierResult | None = None
    reference: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.rmse >= self.mae >= 0.0):
            raise EvaluationError(f"invalid metrics for {self.estimator}: mae={self.mae}, rmse={self.rmse}")

    def metrics_row(self) -> list:
        return [self.estimator, self.dataset, self.n, repr(self.mae), repr(self.rmse),
                "" if self.seed is None else self.seed, self.excluded]

    def to_dict(self) -> dict:
        out = {
            "estimator": self.estimator,
            "dataset": self.dataset,
            "n": self.n,
            "mae": self.mae,
            "rmse": self.rmse,
            "seed": self.seed,
            "excluded": self.excluded,
            "excluded_ids": [list(e) for e in self.predictions.excluded] if self.predictions else [],
            "hyperparams": self.hyperparams,
            "outlier_rule": self.outliers.describe() if self.outliers else "skipped",
            "reference": self.reference,
        }
        if self.outliers is not None and self.outliers.rule != "none" and len(self.outliers.kept):
            out["after_outlier_removal"] = {
                "n": len(self.outliers.kept),
                "mae": mae(self.outliers.kept),
                "rmse": rmse(self.outliers.kept),
            }
        return out


def _coerce_predictions(predictions, test: Dataset) -> PredictionSet:
    """Join estimator output to the test targets by record id."""
    actual = {r.id: r.target_hours for r in test.records}
    pairs, excluded = [], []
    if isinstance(predictions, PredictionSet):
        return predictions
    if isinstance(predictions, np.ndarray) or (
        isinstance(predictions, Sequence) and predictions and isinstance(predictions[0], (int, float, np.floating))
    ):
        preds = np.asarray(predictions, dtype=float)
        if len(preds) != len(test):
            raise EvaluationError(f"{len(preds)} predictions for {len(test)} test records")
        return PredictionSet(tuple((r.id, r.target_hours, float(p)) for r, p in zip(test.records, preds)))
    if isinstance(predictions, Mapping):
        items = [(str(k), v, None) for k, v in predictions.items()]
    else:
        # Estimate-like objects from the LLM client
        items = [(e.source_id, e.predicted_hours, None if e.parse_ok else (getattr(e, "error", None) or "unparsable completion"))
                 for e in predictions]
    seen = set()
    for rid, value, reason in items:
        if rid not in actual:
            log.warning("prediction for unknown id %r ignored", rid)
            continue
        seen.add(rid)
        if reason is not None or value is None or not math.isfinite(value):
            excluded.append((rid, reason or "no numeric prediction"))
        else:
            pairs.append((rid, actual[rid], float(value)))
    order = {r.id: i for i, r in enumerate(test.records)}
    pairs.sort(key=lambda t: order[t[0]])
    excluded.sort(key=lambda t: order[t[0]])
    for r in test.records:
        if r.id not in seen:
            excluded.append((r.id, "no prediction"))
    if excluded:
        log.warning("%d record(s) excluded from metrics", len(excluded))
    return PredictionSet(tuple(pairs), tuple(excluded))


def evaluate(
    estimator: str,
    predictions,
    test: Dataset,
    *,
    seed: int | None = None,
    hyperparams: dict | None = None,
    outlier_rule: str = DEFAULT_OUTLIER_RULE,
) -> EvaluationReport:
    """Score one estimator's output on ``test``.

    ``predictions`` may be an array aligned with ``test.records``, a mapping
    id -> hours, a PredictionSet, or a sequence of LLM ``Estimate`` objects
    (unparsed ones are excluded and counted, never imputed).
    """
    if len(test) == 0:
        raise EmptyPredictionSet("test set is empty")
    ps = _coerce_predictions(predictions, test)
    if len(ps) == 0:
        raise EmptyPredictionSet(f"{estimator}: every prediction was excluded")
    outliers = None
    if outlier_rule != "none" and len(ps) >= 4:
        outliers = remove_outliers(ps, outlier_rule)
    elif outlier_rule == "none":
        outliers = remove_outliers(ps, "none")
    return EvaluationReport(
        estimator=estimator,
        dataset=test.provenance,
        n=len(ps),
        mae=mae(ps),
        rmse=rmse(ps),
        seed=seed,
        excluded=len(ps.excluded),
        hyperparams=dict(hyperparams or {}),
        predictions=ps,
        outliers=outliers,
        reference=reference_for(estimator, test.provenance),
    )


# --- reference values --------------------------------------------------------

def load_reference() -> dict:
    return json.loads((resources.files("effortcast") / "data" / "reference.json").read_text(encoding="utf-8"))


def reference_for(estimator: str, dataset: str) -> dict:
    ref = load_reference()
    cols = [c.lower() for c in ref["rmse"]["columns"]]
    out = {}
    row = ref["rmse"]["rows"].get(estimator)
    if row is not None and dataset.lower() in cols:
        out["rmse"] = row[cols.index(dataset.lower())]
    if dataset.lower() == "isbsg" and estimator in ref["mae_isbsg"]:
        out["mae"] = ref["mae_isbsg"][estimator]
    if out:
        out["label"] = ref["label"]
    return out


def render_reference_markdown() -> str:
    ref = load_reference()
    cols = ref["rmse"]["columns"]
    lines = [f"RMSE by dataset ({ref['label']})", "",
             "| Method | " + " | ".join(cols) + " |", "|---|" + "---|" * len(cols)]
    for name, vals in ref["rmse"]["rows"].items():
        lines.append(f"| {name} | " + " | ".join(f"{v:.2f}" for v in vals) + " |")
    lines += ["", f"MAE on ISBSG ({ref['label']})", "", "| Method | MAE |", "|---|---|"]
    for name, v in ref["mae_isbsg"].items():
        lines.append(f"| {name} | {v:.1f} |")
    lines += ["", f"Note: {ref['note']}"]
    return "\n".join(lines) + "\n"


# --- comparison and output files ---------------------------------------------

@dataclass(frozen=True)
class ComparisonTable:
    metric: str
    estimators: tuple[str, ...]
    datasets: tuple[str, ...]
    cells: Mapping[tuple[str, str], float]

    def to_markdown(self, with_reference: bool = True) -> str:
        header = ["Estimator"]
        for d in self.datasets:
            header.append(d)
            if with_reference:
                header.append(f"{d} (reference)")
        lines = [f"{self.metric.upper()} comparison", "",
                 "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for est in self.estimators:
            row = [est]
            for d in self.datasets:
                v = self.cells.get((est, d))
                row.append("" if v is None else f"{v:.2f}")
                if with_reference:
                    ref = reference_for(est, d).get(self.metric)
                    row.append("" if ref is None else f"{ref:.2f}")
            lines.append("| " + " | ".join(row) + " |")
        if with_reference:
            lines += ["", f"Reference columns are {REFERENCE_LABEL}; they never gate pass/fail."]
        return "\n".join(lines) + "\n"


def compare(reports: Iterable[EvaluationReport], metric: str = "rmse") -> ComparisonTable:
    if metric not in ("mae", "rmse"):
        raise EvaluationError(f"metric must be 'mae' or 'rmse', got {metric!r}")
    reports = list(reports)
    estimators = tuple(dict.fromkeys(r.estimator for r in reports))
    datasets = tuple(dict.fromkeys(r.dataset for r in reports))
    cells = {(r.estimator, r.dataset): getattr(r, metric) for r in reports}
    return ComparisonTable(metric, estimators, datasets, cells)


METRICS_HEADER = ["estimator", "dataset", "n", "mae", "rmse", "seed", "excluded"]


def write_metrics_csv(reports: Iterable[EvaluationReport], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in reports:
            w.writerow(r.metrics_row())


def read_metrics_csv(path: str | Path) -> list[EvaluationReport]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(EvaluationReport(
                estimator=row["estimator"], dataset=row["dataset"], n=int(row["n"]),
                mae=float(row["mae"]), rmse=float(row["rmse"]),
                seed=int(row["seed"]) if row["seed"] else None, excluded=int(row["excluded"]),
                reference=reference_for(row["estimator"], row["dataset"]),
            ))
    return out


def write_scatter_csv(report: EvaluationReport, path: str | Path) -> None:
    """(id, actual, predicted, kept_after_outlier_rule) for external plotting."""
    if report.predictions is None:
        raise EvaluationError(f"report for {report.estimator} carries no predictions")
    dropped = set(report.outliers.dropped_ids) if report.outliers else set()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "actual", "predicted", "kept_after_outlier_rule"])
        for rid, a, p in report.predictions.pairs:
            w.writerow([rid, repr(a), repr(p), "false" if rid in dropped else "true"])
