"""Seeded synthetic fixtures that record what they planted.

Used by the test suite and for offline smoke runs; every generator returns the
dataset together with its ledger of planted quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import (
    MISSING,
    NUMERIC,
    Categorical,
    Dataset,
    FeatureSpec,
    Numeric,
    ProjectRecord,
    isbsg_schema,
    load_schema,
)

# blank-count buckets for the 100-record fixture: {0: 10, 1..3: 50, 4..5: 25, >5: 15}
PLANTED_BUCKETS = ((0, 0, 10), (1, 3, 50), (4, 5, 25), (6, 10, 15))

_LEVELS = {
    "architecture": ["Client server", "Stand alone", "Multi-tier", "Web"],
    "application_group": ["Business Application", "Real-Time Application", "Infrastructure Software"],
    "application_type": ["Financial transaction process/accounting;", "Job, case, incident, project management;", "Workflow support & management;"],
    "primary_programming_language": ["Java", "C#", "COBOL", "PL/I", "Python"],
    "development_methodology": ["Waterfall", "Agile Development", "Iterative", "Scrum"],
}


def _isbsg_value(spec: FeatureSpec, rng: np.random.Generator):
    if spec.kind == NUMERIC:
        v = float(rng.integers(0, 12))
        return Numeric(v, repr(v))
    levels = _LEVELS.get(spec.name, ["A", "B", "C"])
    return Categorical(levels[int(rng.integers(len(levels)))])


def _effort(features: dict, rng: np.random.Generator) -> float:
    team = features.get("max_team_size")
    size = team.value if isinstance(team, Numeric) else 5.0
    return float(round(200.0 + 350.0 * size + rng.gamma(2.0, 400.0), 1))


@dataclass(frozen=True)
class BlankFixture:
    dataset: Dataset
    planted: dict  # record id -> number of blanks planted


def planted_blanks_dataset(seed: int = 0, buckets=PLANTED_BUCKETS, id_prefix: str = "p") -> BlankFixture:
    """ISBSG-schema records with an exact, recorded number of MISSING features each."""
    rng = np.random.default_rng(seed)
    schema = isbsg_schema()
    names = [f.name for f in schema]
    counts = []
    for lo, hi, total in buckets:
        width = hi - lo + 1
        for j in range(total):
            counts.append(lo + j % width)
    order = rng.permutation(len(counts))
    records, planted = [], {}
    for i, pos in enumerate(order):
        k = counts[pos]
        blanks = set(rng.choice(len(names), size=k, replace=False).tolist())
        feats = {}
        for j, spec in enumerate(schema):
            feats[spec.name] = MISSING if j in blanks else _isbsg_value(spec, rng)
        rid = f"{id_prefix}{i:04d}"
        records.append(ProjectRecord(rid, feats, _effort(feats, rng)))
        planted[rid] = k
    return BlankFixture(Dataset(schema, tuple(records), "synthetic"), planted)


def tiered_dataset(n_total: int, n_tier: int, tier_max_missing: int = 3, seed: int = 0) -> BlankFixture:
    """``n_tier`` records with <= tier_max_missing blanks, the rest with more."""
    hi = 10 - tier_max_missing
    buckets = ((0, tier_max_missing, n_tier), (tier_max_missing + 1, tier_max_missing + min(hi, 2), n_total - n_tier))
    return planted_blanks_dataset(seed, buckets)


@dataclass(frozen=True)
class CorrelationFixture:
    dataset: Dataset
    planted_r: dict  # feature name -> exact sample Pearson r with the target


def planted_correlation_dataset(rs: dict[str, float], n: int = 200, seed: int = 0) -> CorrelationFixture:
    """Numeric features whose sample correlation with the target is exactly the planted r.

    Each feature is ``r * z + sqrt(1 - r^2) * e_j`` where ``z`` is the
    standardized target and the ``e_j`` are orthonormalized against ``z`` and
    each other.
    """
    rng = np.random.default_rng(seed)
    target = rng.gamma(2.0, 1500.0, size=n) + 50.0
    z = target - target.mean()
    z /= np.linalg.norm(z)
    raw = rng.normal(size=(n, len(rs)))
    basis = np.column_stack([np.ones(n) / np.sqrt(n), z, raw])
    q, _ = np.linalg.qr(basis)
    schema = tuple(FeatureSpec(name, NUMERIC) for name in rs)
    cols = {}
    for j, (name, r) in enumerate(rs.items()):
        e = q[:, 2 + j] * np.sign(q[:, 2 + j] @ raw[:, j] or 1.0)
        cols[name] = 100.0 + 10.0 * (r * z + np.sqrt(1.0 - r * r) * e)
    records = tuple(
        ProjectRecord(f"c{i:04d}", {name: Numeric(float(cols[name][i])) for name in rs}, float(target[i]))
        for i in range(n)
    )
    return CorrelationFixture(Dataset(schema, records, "synthetic"), dict(rs))


def desharnais_like(n: int = 81, seed: int = 0) -> Dataset:
    """Synthetic projects in the Desharnais layout (not the real data).

    Effort grows roughly linearly with adjusted function points, with
    multiplicative noise, giving hour magnitudes in the low thousands.
    """
    rng = np.random.default_rng(seed)
    schema = load_schema("desharnais")
    records = []
    for i in range(n):
        trans = int(rng.integers(9, 700))
        ent = int(rng.integers(7, 390))
        raw_fp = trans + ent
        adj = int(rng.integers(5, 52))
        fp = round(raw_fp * (0.65 + 0.01 * adj))
        feats = {
            "team_exp": Numeric(int(rng.integers(0, 5))),
            "manager_exp": Numeric(int(rng.integers(0, 8))) if rng.random() > 0.03 else MISSING,
            "year_end": Numeric(int(rng.integers(82, 89))),
            "length": Numeric(int(rng.integers(1, 37))),
            "transactions": Numeric(trans),
            "entities": Numeric(ent),
            "points_non_adjust": Numeric(raw_fp),
            "adjustment": Numeric(adj),
            "points_adjust": Numeric(fp),
            "language": Categorical(str(int(rng.integers(1, 4)))),
        }
        effort = float(max(300, round(18.0 * fp * rng.lognormal(0.0, 0.45))))
        records.append(ProjectRecord(str(i + 1), feats, effort))
    return Dataset(schema, tuple(records), "synthetic")
