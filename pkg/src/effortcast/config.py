"""Single INI-style run configuration with typed sections and CLI overrides.

Values may be wrapped in double quotes (JSON string syntax) to keep leading or
trailing whitespace, e.g. ``preamble = "What is ...: "``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from .baselines import DEFAULT_PARAMS, canonical_kind
from .dataset import (
    DEFAULT_SENTINELS,
    CompletenessTier,
    PinnedTier,
    SplitSpec,
    load_schema,
)
from .errors import ConfigError
from .llmclient import DEFAULT_API_KEY_ENV, ProviderConfig
from .promptgen import DEFAULT_COMPLETION, DEFAULT_PREAMBLE, DEFAULT_SEPARATOR, PromptTemplate


def _value(raw: str) -> Any:
    raw = raw.strip()
    if raw == "":
        return None
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return json.loads(raw)
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


@dataclass
class DatasetSection:
    schema: str = "isbsg"
    target_column: str = "Normalised Work Effort"
    id_column: str = "id"
    provenance: str = "other"
    missing_sentinels: tuple[str, ...] = DEFAULT_SENTINELS


@dataclass
class TemplateSection:
    preamble: str = DEFAULT_PREAMBLE
    separator: str = DEFAULT_SEPARATOR
    completion: str = DEFAULT_COMPLETION
    completion_suffix: str = ""
    missing_text: str | None = None


@dataclass
class SplitSection:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0
    pin_max_missing: int | None = None
    pin_train_frac: float = 0.5


@dataclass
class ProviderSection:
    kind: str = "mock-oracle"
    base_url: str = "https://api.openai.com/v1"
    model: str = ""
    api_key_env_var: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    max_concurrent_requests: int = 4
    max_attempts: int = 3
    base_backoff: float = 0.5
    max_tokens: int = 32
    garbage_every: int = 10
    constant_text: str = "Estimated cost is: 100.0 hours"
    poll_interval: float = 30.0
    max_polls: int = 240


@dataclass
class EvaluateSection:
    estimators: tuple[str, ...] = ("knn", "linreg", "svm")
    seeds: tuple[int, ...] = (0,)
    outlier_rule: str = "iqr-iterated"
    train: float = 0.8
    test: float = 0.2


@dataclass
class RunConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    template: TemplateSection = field(default_factory=TemplateSection)
    split: SplitSection = field(default_factory=SplitSection)
    provider: ProviderSection = field(default_factory=ProviderSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    estimators: dict[str, dict[str, Any]] = field(default_factory=dict)
    source: str | None = None

    # --- derived objects ---------------------------------------------------
    def schema(self):
        return load_schema(self.dataset.schema)

    def prompt_template(self) -> PromptTemplate:
        t = self.template
        return PromptTemplate.from_schema(
            self.schema(), preamble=t.preamble, separator=t.separator, completion=t.completion,
            completion_suffix=t.completion_suffix, missing_text=t.missing_text,
        )

    def split_spec(self) -> SplitSpec:
        s = self.split
        pinned = None
        if s.pin_max_missing is not None:
            pinned = PinnedTier(CompletenessTier(int(s.pin_max_missing)), float(s.pin_train_frac))
        return SplitSpec(float(s.train), float(s.val), float(s.test), int(s.seed), pinned)

    def provider_config(self) -> ProviderConfig:
        p = self.provider
        return ProviderConfig(
            base_url=p.base_url, model_name=p.model, api_key_env_var=p.api_key_env_var, timeout=float(p.timeout),
            max_concurrent_requests=int(p.max_concurrent_requests), max_attempts=int(p.max_attempts),
            base_backoff=float(p.base_backoff), max_tokens=int(p.max_tokens),
        )

    def estimator_params(self, kind: str) -> dict[str, Any]:
        return dict(self.estimators.get(canonical_kind(kind), {}))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return "sha256:" + hashlib.sha256(blob).hexdigest()


_SECTIONS = {
    "dataset": DatasetSection,
    "template": TemplateSection,
    "split": SplitSection,
    "provider": ProviderSection,
    "evaluate": EvaluateSection,
}
_TUPLE_FIELDS = {("dataset", "missing_sentinels"): "|", ("evaluate", "estimators"): ",", ("evaluate", "seeds"): ","}


def _section_values(name: str, items: dict[str, str]) -> dict[str, Any]:
    cls = _SECTIONS[name]
    known = set(cls.__dataclass_fields__)
    out = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        sep = _TUPLE_FIELDS.get((name, key))
        if sep is not None:
            text = json.loads(raw.strip()) if raw.strip().startswith('"') else raw
            parts = [p.strip() for p in text.split(sep)]
            if key == "seeds":
                out[key] = tuple(int(p) for p in parts if p)
            elif key == "estimators":
                out[key] = tuple(p for p in parts if p)
            else:
                out[key] = tuple(parts)
        else:
            default = cls.__dataclass_fields__[key].default
            if isinstance(default, str):
                stripped = raw.strip()
                v = json.loads(stripped) if stripped.startswith('"') and stripped.endswith('"') and len(stripped) >= 2 else stripped
            else:
                v = _value(raw)
            out[key] = v
    return out


def load_config(path: str | Path | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    for section in parser.sections():
        items = dict(parser.items(section))
        if section in _SECTIONS:
            current = getattr(cfg, section)
            try:
                setattr(cfg, section, replace(current, **_section_values(section, items)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{section}]: {exc}") from None
        elif section.startswith("estimator."):
            kind = canonical_kind(section.split(".", 1)[1])
            cfg.estimators[kind] = {k: _value(v) for k, v in items.items()}
            unknown = set(cfg.estimators[kind]) - set(DEFAULT_PARAMS[kind]) - {"seed", "bootstrap", "activation", "ridge",
                                                                              "fallback", "fallback_lambda", "min_leaf",
                                                                              "feature_frac", "subsample"}
            if unknown:
                raise ConfigError(f"unknown hyperparameters {sorted(unknown)} in [{section}]")
        else:
            raise ConfigError(f"unknown section [{section}]")
    cfg.source = str(path)
    return cfg


def override(cfg: RunConfig, section: str, **values) -> RunConfig:
    """Apply non-None CLI flag values to one section."""
    values = {k: v for k, v in values.items() if v is not None}
    if values:
        try:
            setattr(cfg, section, replace(getattr(cfg, section), **values))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad override for [{section}]: {exc}") from None
    return cfg
