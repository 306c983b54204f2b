"""Project datasets: CSV loading, explicit missing values, completeness tiers and splits."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    DuplicateId,
    EmptyDataset,
    InvalidSchema,
    InvalidSplit,
    InvalidTarget,
    MalformedCsv,
    PinnedTierLargerThanSplit,
    UnknownFeature,
    UnparsableNumeric,
)

log = logging.getLogger(__name__)

DEFAULT_SENTINELS = ("", "NA", "N/A")

# Published project counts per dataset.
REFERENCE_SIZES = {"desharnais": 81, "cocomo": 93, "maxwell": 62, "isbsg": 7518}
KNOWN_PROVENANCE = ("isbsg", "desharnais", "cocomo", "synthetic")

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class _MissingType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_MissingType, ())


MISSING = _MissingType()


@dataclass(frozen=True)
class Numeric:
    """A finite real value. ``text`` keeps the source spelling for rendering."""

    value: float
    text: str | None = None

    def __post_init__(self):
        if isinstance(self.value, bool) or not math.isfinite(self.value):
            raise ValueError(f"numeric feature values must be finite, got {self.value!r}")

    def render(self) -> str:
        if self.text is not None:
            return self.text
        if isinstance(self.value, (int, np.integer)):
            return str(int(self.value))
        return repr(float(self.value))


@dataclass(frozen=True)
class Categorical:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("categorical values must be non-empty after trimming")

    def render(self) -> str:
        return self.text


FeatureValue = Union[Numeric, Categorical, _MissingType]


@dataclass(frozen=True)
class FeatureSpec:
    """One selected feature: its kind, CSV column and prompt clause.

    ``clause`` holds a single ``{}`` slot for the rendered value. ``joiner``
    overrides the template separator placed before this clause.
    """

    name: str
    kind: str
    column: str | None = None
    clause: str | None = None
    joiner: str | None = None

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise InvalidSchema(f"feature {self.name!r}: kind must be numeric or categorical, got {self.kind!r}")
        if self.clause is not None and self.clause.count("{}") != 1:
            raise InvalidSchema(f"feature {self.name!r}: clause must contain exactly one '{{}}' slot")

    @property
    def csv_column(self) -> str:
        return self.column or self.name


def validate_schema(schema: Sequence[FeatureSpec]) -> tuple[FeatureSpec, ...]:
    names = [f.name for f in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise InvalidSchema(f"duplicate feature names: {dupes}")
    return tuple(schema)


def schema_from_dicts(entries: Iterable[Mapping]) -> tuple[FeatureSpec, ...]:
    specs = []
    for entry in entries:
        unknown = set(entry) - {"name", "kind", "column", "clause", "joiner"}
        if unknown:
            raise InvalidSchema(f"unknown schema keys {sorted(unknown)} in {dict(entry)}")
        specs.append(FeatureSpec(**entry))
    return validate_schema(specs)


def schema_to_dicts(schema: Sequence[FeatureSpec]) -> list[dict]:
    out = []
    for f in schema:
        d = {"name": f.name, "kind": f.kind}
        for key in ("column", "clause", "joiner"):
            if getattr(f, key) is not None:
                d[key] = getattr(f, key)
        out.append(d)
    return out


def load_schema(source: str | Path) -> tuple[FeatureSpec, ...]:
    """Load a schema from a JSON file, or by built-in name (``isbsg``, ``desharnais``)."""
    source = str(source)
    builtin = resources.files("effortcast") / "data" / "schemas" / f"{source}.json"
    if "/" not in source and not source.endswith(".json") and builtin.is_file():
        text = builtin.read_text(encoding="utf-8")
    else:
        path = Path(source)
        if not path.is_file():
            raise InvalidSchema(f"schema {source!r} is neither a built-in name nor an existing file")
        text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSchema(f"schema {source!r} is not valid JSON: {exc}") from exc
    entries = doc["features"] if isinstance(doc, dict) else doc
    return schema_from_dicts(entries)


def isbsg_schema() -> tuple[FeatureSpec, ...]:
    return load_schema("isbsg")


@dataclass(frozen=True)
class ProjectRecord:
    id: str
    features: Mapping[str, FeatureValue]
    target_hours: float | None

    def __post_init__(self):
        if not isinstance(self.features, MappingProxyType):
            object.__setattr__(self, "features", MappingProxyType(dict(self.features)))
        if self.target_hours is not None and not (math.isfinite(self.target_hours) and self.target_hours > 0):
            raise InvalidTarget(f"record {self.id!r}: target hours must be a positive finite number, got {self.target_hours!r}")

    def get(self, name: str) -> FeatureValue:
        return self.features.get(name, MISSING)

    def __reduce__(self):
        return (ProjectRecord, (self.id, dict(self.features), self.target_hours))


@dataclass(frozen=True)
class Dataset:
    schema: tuple[FeatureSpec, ...]
    records: tuple[ProjectRecord, ...]
    provenance: str = "other"
    dropped_missing_target: int = 0

    def __post_init__(self):
        object.__setattr__(self, "schema", validate_schema(self.schema))
        object.__setattr__(self, "records", tuple(self.records))
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            seen, dupes = set(), []
            for i in ids:
                if i in seen:
                    dupes.append(i)
                seen.add(i)
            raise DuplicateId(f"record ids must be unique; duplicates: {dupes[:5]}")
        names = {f.name for f in self.schema}
        for r in self.records:
            extra = set(r.features) - names
            if extra:
                raise UnknownFeature(f"record {r.id!r} has features outside the schema: {sorted(extra)}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.schema]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def targets(self) -> np.ndarray:
        return np.array([r.target_hours for r in self.records], dtype=float)

    def subset(self, records: Iterable[ProjectRecord]) -> "Dataset":
        return Dataset(self.schema, tuple(records), self.provenance)

    def inventory_check(self) -> int | None:
        """Published project count for this provenance, or None when unknown."""
        return REFERENCE_SIZES.get(self.provenance.lower())


def _parse_cell(raw: str, spec: FeatureSpec, row: int, sentinels: frozenset[str]) -> FeatureValue:
    cell = raw.strip()
    if raw in sentinels or cell in sentinels or not cell:
        return MISSING
    if spec.kind == CATEGORICAL:
        return Categorical(cell)
    try:
        value = float(cell)
    except ValueError:
        raise UnparsableNumeric(row, spec.csv_column, raw) from None
    if not math.isfinite(value):
        raise UnparsableNumeric(row, spec.csv_column, raw)
    return Numeric(value, cell)


def load_csv(
    path: str | Path,
    schema: Sequence[FeatureSpec],
    target_column: str,
    *,
    id_column: str | None = "id",
    sentinels: Iterable[str] = DEFAULT_SENTINELS,
    provenance: str = "other",
) -> Dataset:
    """Read one ProjectRecord per data row.

    Cells equal to a sentinel (after trimming) become ``MISSING``. Rows whose
    target is missing are dropped and counted in ``dropped_missing_target``.
    If ``id_column`` is absent from the header, ids are ``row-<n>`` (1-based).
    """
    schema = validate_schema(schema)
    sentinel_set = frozenset(sentinels) | frozenset(s.strip() for s in sentinels)
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv(f"{path}: file is empty, a header row is required") from None
        header = [h.strip() for h in header]
        index = {name: i for i, name in enumerate(header)}
        if target_column not in index:
            raise MalformedCsv(f"{path}: header lacks target column {target_column!r}")
        absent = [f.csv_column for f in schema if f.csv_column not in index]
        if absent:
            raise MalformedCsv(f"{path}: header lacks schema columns {absent}")
        id_idx = index.get(id_column) if id_column else None

        records = []
        dropped = 0
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedCsv(f"{path}: row {rowno} has {len(row)} cells, header has {len(header)}")
            raw_target = row[index[target_column]]
            if raw_target in sentinel_set or raw_target.strip() in sentinel_set:
                dropped += 1
                continue
            try:
                target = float(raw_target.strip())
            except ValueError:
                raise UnparsableNumeric(rowno, target_column, raw_target) from None
            if not math.isfinite(target):
                raise UnparsableNumeric(rowno, target_column, raw_target)
            if target <= 0:
                raise InvalidTarget(f"{path}: row {rowno} has non-positive target {raw_target!r}")
            features = {f.name: _parse_cell(row[index[f.csv_column]], f, rowno, sentinel_set) for f in schema}
            rid = row[id_idx].strip() if id_idx is not None else f"row-{rowno}"
            records.append(ProjectRecord(rid, features, target))
    if dropped:
        log.warning("%s: dropped %d row(s) with a missing target", path, dropped)
    ds = Dataset(schema, tuple(records), provenance, dropped)
    expected = ds.inventory_check()
    if expected is not None and len(ds) + dropped != expected:
        log.info("%s: %d rows loaded; the reference inventory lists %d for %s", path, len(ds) + dropped, expected, provenance)
    return ds


def write_csv(ds: Dataset, path: str | Path, target_column: str, *, id_column: str = "id") -> None:
    """Write a dataset in the layout ``load_csv`` reads back (source spellings preserved)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([id_column, *[f.csv_column for f in ds.schema], target_column])
        for r in ds.records:
            cells = []
            for f in ds.schema:
                v = r.get(f.name)
                cells.append("" if v is MISSING else v.render())
            target = "" if r.target_hours is None else repr(float(r.target_hours))
            writer.writerow([r.id, *cells, target])


def count_missing(
    record: ProjectRecord,
    selected: Iterable[str] | None = None,
    schema: Sequence[FeatureSpec] | None = None,
) -> int:
    """Number of ``selected`` features that are MISSING or absent from the record."""
    if selected is None:
        if schema is None:
            raise ValueError("count_missing needs either selected names or a schema")
        selected = [f.name for f in schema]
    selected = list(selected)
    if schema is not None:
        names = {f.name for f in schema}
        unknown = [n for n in selected if n not in names]
        if unknown:
            raise UnknownFeature(f"selected features not in schema: {unknown}")
    return sum(1 for name in selected if record.get(name) is MISSING)


@dataclass(frozen=True)
class CompletenessTier:
    max_missing: int

    def __post_init__(self):
        if isinstance(self.max_missing, bool) or self.max_missing < 0:
            raise InvalidSchema(f"max_missing must be a non-negative integer, got {self.max_missing!r}")


def stratify_by_completeness(
    ds: Dataset, tier: CompletenessTier | int, selected: Sequence[str] | None = None
) -> Dataset:
    if isinstance(tier, int):
        tier = CompletenessTier(tier)
    selected = list(selected) if selected is not None else ds.feature_names
    if tier.max_missing > len(selected):
        raise InvalidSchema(f"tier max_missing={tier.max_missing} exceeds the {len(selected)} selected features")
    kept = [r for r in ds.records if count_missing(r, selected, ds.schema) <= tier.max_missing]
    return Dataset(ds.schema, tuple(kept), ds.provenance)


@dataclass(frozen=True)
class PinnedTier:
    tier: CompletenessTier
    train_frac_within_tier: float

    def __post_init__(self):
        if not 0.0 <= self.train_frac_within_tier <= 1.0:
            raise InvalidSplit("train_frac_within_tier must lie in [0, 1]")


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0
    pinned: PinnedTier | None = None

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not 0.0 <= f <= 1.0 for f in fracs):
            raise InvalidSplit(f"split fractions must lie in [0, 1], got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise InvalidSplit(f"split fractions must sum to 1, got {sum(fracs)!r}")
        if isinstance(self.seed, bool) or self.seed < 0:
            raise InvalidSplit(f"seed must be an unsigned integer, got {self.seed!r}")


def _floor(x: float) -> int:
    # absorbs representation error such as 0.29 * 100 == 28.999999999999996
    return int(math.floor(x + 1e-9))


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_train = _floor(spec.train_frac * n)
    n_val = _floor(spec.val_frac * n)
    return n_train, n_val, n - n_train - n_val


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Partition ``ds`` into (train, val, test).

    One seeded permutation drives all allocation. With a pinned tier, the
    tier's records go train/test only (by ``train_frac_within_tier``) and the
    remaining records fill the global quotas. Each output keeps input order.
    """
    n = len(ds)
    if n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    n_train, n_val, n_test = split_sizes(n, spec)
    perm = np.random.default_rng(spec.seed).permutation(n)

    buckets: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    if spec.pinned is None:
        buckets["train"] = list(perm[:n_train])
        buckets["val"] = list(perm[n_train:n_train + n_val])
        buckets["test"] = list(perm[n_train + n_val:])
    else:
        max_missing = spec.pinned.tier.max_missing
        in_tier = [count_missing(r, ds.feature_names, ds.schema) <= max_missing for r in ds.records]
        pinned = [int(i) for i in perm if in_tier[i]]
        rest = [int(i) for i in perm if not in_tier[i]]
        p_train = _floor(spec.pinned.train_frac_within_tier * len(pinned))
        p_test = len(pinned) - p_train
        r_train, r_test = n_train - p_train, n_test - p_test
        if r_train < 0 or r_test < 0:
            raise PinnedTierLargerThanSplit(
                f"pinned tier of {len(pinned)} records ({p_train} train / {p_test} test) does not fit "
                f"split sizes train={n_train}, test={n_test}"
            )
        buckets["train"] = pinned[:p_train] + rest[:r_train]
        buckets["val"] = rest[r_train:r_train + n_val]
        buckets["test"] = pinned[p_train:] + rest[r_train + n_val:]

    out = []
    for name in ("train", "val", "test"):
        idx = sorted(int(i) for i in buckets[name])
        out.append(Dataset(ds.schema, tuple(ds.records[i] for i in idx), ds.provenance))
    return out[0], out[1], out[2]


def missing_histogram(ds: Dataset) -> dict[int, int]:
    hist: dict[int, int] = {}
    for r in ds.records:
        k = count_missing(r, ds.feature_names, ds.schema)
        hist[k] = hist.get(k, 0) + 1
    return dict(sorted(hist.items()))
