"""Command-line entry point: ``effortcast <subcommand> ...``.

Every subcommand writes its outputs plus ``manifest-<subcommand>.json``
(timestamp, config digest, input digests, seeds, output digests) and a debug
log with secrets redacted. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import DISPLAY_NAMES, ESTIMATORS, Hyperparams, canonical_kind, fit_model
from .config import RunConfig, load_config, override
from .correlate import METHOD, rank_features
from .dataset import (
    CompletenessTier,
    Dataset,
    SplitSpec,
    load_csv,
    missing_histogram,
    split,
    stratify_by_completeness,
    write_csv,
)
from .errors import EffortcastError, InvalidHyperparams, LLMClientError, ProviderConfigError
from .evaluation import (
    OUTLIER_RULES,
    compare,
    evaluate,
    read_metrics_csv,
    render_reference_markdown,
    write_metrics_csv,
    write_scatter_csv,
)
from .llmclient import Estimate, FineTuneJob, LLMClient, SecretRedactingFilter
from .mocks import PROVIDER_KINDS, ConstantProvider, EchoOracleProvider, ScriptedProvider
from .promptgen import build_records, emit_corpus

log = logging.getLogger("effortcast")

DATA_SUFFIXES = (".csv", ".json", ".jsonl", ".md")


def sha256_file(path: Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _existing_file(value: str) -> Path:
    p = Path(value)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"file not found: {value}")
    return p


def _fraction(value: str) -> float:
    try:
        f = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value}") from None
    if not 0.0 <= f <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {value}")
    return f


def _int_list(value: str) -> tuple[int, ...]:
    try:
        out = tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {value}") from None
    if not out or any(v < 0 for v in out):
        raise argparse.ArgumentTypeError(f"expected non-negative integers: {value}")
    return out


def _estimator_list(value: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in value.split(",") if v.strip())
    try:
        return tuple(canonical_kind(n) for n in names)
    except InvalidHyperparams:
        raise argparse.ArgumentTypeError(f"unknown estimator in {value!r}; choose from {','.join(ESTIMATORS)}") from None


class Run:
    """Bookkeeping for one subcommand invocation: inputs, outputs, seeds, manifest."""

    def __init__(self, subcommand: str, cfg: RunConfig, out_dir: Path, argv: list[str]):
        self.subcommand = subcommand
        self.cfg = cfg
        self.out_dir = out_dir
        self.argv = argv
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        self.seeds: list[int] = []
        self.extras: dict = {}

    def add_input(self, path: Path):
        self.inputs[str(path)] = sha256_file(path)

    def output(self, name: str) -> Path:
        path = self.out_dir / name
        self.outputs.append(path)
        return path

    def write_manifest(self):
        manifest = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "tool_version": __version__,
            "subcommand": self.subcommand,
            "argv": self.argv,
            "config_source": self.cfg.source,
            "config_digest": self.cfg.digest(),
            "dataset_digests": self.inputs,
            "seeds": self.seeds,
            "outputs": {str(p): sha256_file(p) for p in self.outputs if p.is_file()},
            "extras": self.extras,
        }
        path = self.out_dir / f"manifest-{self.subcommand}.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _load(run: Run, path: Path) -> Dataset:
    d = run.cfg.dataset
    run.add_input(path)
    return load_csv(path, run.cfg.schema(), d.target_column, id_column=d.id_column,
                    sentinels=d.missing_sentinels, provenance=d.provenance)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- subcommands ---------------------------------------------------------------

def cmd_ingest(run: Run, args):
    ds = _load(run, args.input)
    write_csv(ds, run.output("dataset.csv"), run.cfg.dataset.target_column, id_column=run.cfg.dataset.id_column or "id")
    expected = ds.inventory_check()
    summary = {
        "provenance": ds.provenance,
        "records": len(ds),
        "dropped_missing_target": ds.dropped_missing_target,
        "features": ds.feature_names,
        "missing_histogram": {str(k): v for k, v in missing_histogram(ds).items()},
        "reference_inventory_size": expected,
        "matches_reference_inventory": None if expected is None else len(ds) + ds.dropped_missing_target == expected,
    }
    _write_json(run.output("summary.json"), summary)
    print(f"ingested {len(ds)} records ({ds.dropped_missing_target} dropped for missing target)")


def cmd_correlate(run: Run, args):
    ds = _load(run, args.input)
    report = rank_features(ds, run.cfg.dataset.target_column, args.k)
    report.to_csv(run.output("correlation.csv"))
    run.extras["correlation_method"] = METHOD
    run.extras["categorical_levels"] = {e.feature: e.level for e in report.entries if e.level is not None}
    for e in report.entries:
        print(f"{e.feature:32s} r={'undefined' if e.r is None else f'{e.r:+.4f}'} n={e.n_pairs}")


def cmd_stratify(run: Run, args):
    ds = _load(run, args.input)
    counts = {}
    for m in args.max_missing:
        tier = stratify_by_completeness(ds, CompletenessTier(m))
        write_csv(tier, run.output(f"tier-{m}.csv"), run.cfg.dataset.target_column, id_column=run.cfg.dataset.id_column or "id")
        counts[str(m)] = len(tier)
        print(f"max_missing={m}: {len(tier)} records")
    _write_json(run.output("tiers.json"), {"input_records": len(ds), "tiers": counts})


def cmd_split(run: Run, args):
    cfg = override(run.cfg, "split", train=args.train, val=args.val, test=args.test, seed=args.seed,
                   pin_max_missing=args.pin_max_missing, pin_train_frac=args.pin_train_frac)
    spec = cfg.split_spec()
    run.seeds.append(spec.seed)
    ds = _load(run, args.input)
    parts = split(ds, spec)
    sizes = {}
    for name, part in zip(("train", "val", "test"), parts):
        write_csv(part, run.output(f"{name}.csv"), cfg.dataset.target_column, id_column=cfg.dataset.id_column or "id")
        sizes[name] = len(part)
    if spec.pinned is not None:
        tier_ids = {r.id for r in stratify_by_completeness(ds, spec.pinned.tier).records}
        sizes["pinned_tier"] = {name: sum(r.id in tier_ids for r in part) for name, part in zip(("train", "val", "test"), parts)}
    _write_json(run.output("split.json"), {"seed": spec.seed, "sizes": sizes})
    print(json.dumps(sizes, sort_keys=True))


def cmd_gen_prompts(run: Run, args):
    ds = _load(run, args.input)
    out = Path(args.out)
    run.outputs.append(out)
    n = emit_corpus(ds, run.cfg.prompt_template(), out)
    print(f"wrote {n} prompt/completion pairs to {out}")


def _build_provider(run: Run, ds: Dataset | None = None, ids: list[str] | None = None):
    p = run.cfg.provider
    kind = p.kind
    if kind == "http":
        return None
    if kind == "mock-oracle":
        if ds is None:
            return EchoOracleProvider()
        return EchoOracleProvider.from_dataset(ds, run.cfg.prompt_template())
    if kind == "mock-constant":
        return ConstantProvider(p.constant_text)
    if kind == "mock-scripted":
        oracle = EchoOracleProvider.from_dataset(ds, run.cfg.prompt_template()) if ds is not None else EchoOracleProvider()
        return ScriptedProvider.garbage_every(ids or [], int(p.garbage_every), oracle)
    raise ProviderConfigError(f"unknown provider kind {kind!r}; choose from {PROVIDER_KINDS}")


def cmd_finetune(run: Run, args):
    override(run.cfg, "provider", kind=args.provider, model=args.base_model)
    run.add_input(args.corpus)
    client = LLMClient(run.cfg.provider_config(), _build_provider(run))
    job = client.submit_finetune(args.corpus, run.cfg.provider.model)
    job = client.wait_for_job(job, interval=run.cfg.provider.poll_interval, max_polls=run.cfg.provider.max_polls)
    _write_json(run.output("job.json"), job.to_dict())
    run.extras["provider"] = run.cfg.provider.kind
    print(f"job {job.job_id}: {job.status}" + (f" -> {job.result_model}" if job.result_model else ""))
    if job.status == "failed":
        raise ProviderConfigError(f"fine-tune job {job.job_id} failed: {job.message}")


def cmd_predict(run: Run, args):
    override(run.cfg, "provider", kind=args.provider)
    model = args.model
    if args.job is not None:
        run.add_input(args.job)
        job = FineTuneJob.from_dict(json.loads(args.job.read_text(encoding="utf-8")))
        if job.status != "succeeded":
            raise ProviderConfigError(f"job {job.job_id} has status {job.status}; no model to query")
        model = job.result_model
    if not model:
        raise ProviderConfigError("predict needs --model or --job")
    ds = _load(run, args.input)
    template = run.cfg.prompt_template()
    items = [(rec.source_id, rec.prompt) for rec in build_records(ds, template)]
    client = LLMClient(run.cfg.provider_config(), _build_provider(run, ds, [i for i, _ in items]))
    estimates = client.batch_predict(items, model)
    with run.output("predictions.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "predicted_hours", "parse_ok", "raw_completion", "error"])
        for e in estimates:
            w.writerow([e.source_id, "" if e.predicted_hours is None else repr(e.predicted_hours),
                        "true" if e.parse_ok else "false", e.raw_completion, e.error or ""])
    bad = sum(not e.parse_ok for e in estimates)
    run.extras.update({"model": model, "provider": run.cfg.provider.kind, "unparsed": bad})
    print(f"{len(estimates)} estimates, {bad} unparsable")
    if estimates and all(not e.parse_ok and not e.raw_completion for e in estimates):
        raise LLMClientError(f"all {len(estimates)} requests failed; first error: {estimates[0].error}")


def read_predictions(path: Path) -> list[Estimate]:
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ok = row["parse_ok"] == "true"
            out.append(Estimate(row["id"], float(row["predicted_hours"]) if ok else None,
                                row["raw_completion"], ok, row.get("error") or None))
    return out


def cmd_evaluate(run: Run, args):
    cfg = run.cfg
    override(cfg, "evaluate", estimators=args.estimators, seeds=args.seed, outlier_rule=args.outlier_rule)
    ev = cfg.evaluate
    reports = []
    explicit = args.train is not None
    if explicit and args.test is None:
        raise ProviderConfigError("--train requires --test")
    full = _load(run, args.dataset) if args.dataset is not None else None
    train_fixed = _load(run, args.train) if explicit else None
    test_fixed = _load(run, args.test) if args.test is not None else None
    kinds = list(ev.estimators) if args.estimators is not None or args.predictions is None else []
    run.seeds.extend(ev.seeds)
    hyper_echo = {}
    for seed in ev.seeds:
        if kinds:
            if explicit:
                train, test = train_fixed, test_fixed
            elif full is not None:
                val = max(0.0, round(1.0 - ev.train - ev.test, 12))
                train, _, test = split(full, SplitSpec(ev.train, val, ev.test, seed))
            else:
                raise ProviderConfigError("baseline estimators need --dataset or --train/--test")
            for kind in kinds:
                model = fit_model(train, Hyperparams(kind, cfg.estimator_params(kind)), seed)
                name = DISPLAY_NAMES[kind]
                hyper_echo[name] = model.summary()
                reports.append(evaluate(name, model.predict(test), test, seed=seed,
                                        hyperparams=model.hyperparams, outlier_rule=ev.outlier_rule))
    if args.predictions is not None:
        run.add_input(args.predictions)
        target = test_fixed if test_fixed is not None else full
        if target is None:
            raise ProviderConfigError("--predictions needs --test or --dataset to supply the true targets")
        estimates = read_predictions(args.predictions)
        reports.append(evaluate(args.predictions_name, estimates, target, outlier_rule=ev.outlier_rule))
    if not reports:
        raise ProviderConfigError("nothing to evaluate: give --estimators and/or --predictions")

    write_metrics_csv(reports, run.output("metrics.csv"))
    for r in reports:
        suffix = "" if r.seed is None else f"-seed{r.seed}"
        write_scatter_csv(r, run.output(f"scatter-{r.estimator.lower().replace(' ', '-')}{suffix}.csv"))
    _write_json(run.output("report.json"), {
        "reports": [r.to_dict() for r in reports],
        "models": hyper_echo,
        "summary": _seed_summary(reports),
    })
    tables = [compare(_averaged(reports), m).to_markdown() for m in ("rmse", "mae")]
    run.output("comparison.md").write_text("\n".join(tables), encoding="utf-8")
    for row in _seed_summary(reports):
        print(f"{row['estimator']:28s} {row['dataset']:12s} n_seeds={row['n_seeds']} "
              f"mae={row['mae_mean']:.2f} rmse={row['rmse_mean']:.2f} excluded={row['excluded']}")


def _seed_summary(reports):
    groups: dict[tuple[str, str], list] = {}
    for r in reports:
        groups.setdefault((r.estimator, r.dataset), []).append(r)
    out = []
    for (est, ds), rs in groups.items():
        out.append({
            "estimator": est, "dataset": ds, "n_seeds": len(rs),
            "mae_mean": float(np.mean([r.mae for r in rs])),
            "rmse_mean": float(np.mean([r.rmse for r in rs])),
            "excluded": int(sum(r.excluded for r in rs)),
        })
    return out


def _averaged(reports):
    from .evaluation import EvaluationReport
    return [EvaluationReport(s["estimator"], s["dataset"], 0, s["mae_mean"], max(s["rmse_mean"], s["mae_mean"]))
            for s in _seed_summary(reports)]


def cmd_report(run: Run, args):
    reports = []
    for path in args.metrics or []:
        run.add_input(path)
        reports.extend(read_metrics_csv(path))
    parts = []
    if reports:
        parts += [compare(_averaged(reports), m).to_markdown() for m in ("rmse", "mae")]
    parts.append(render_reference_markdown())
    text = "\n".join(parts)
    run.output("report.md").write_text(text, encoding="utf-8")
    print(text)


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=_existing_file, help="INI run configuration")
    common.add_argument("--schema", help="built-in schema name (isbsg, desharnais) or JSON schema path")
    common.add_argument("--target-column")
    common.add_argument("--id-column")
    common.add_argument("--provenance", help="dataset tag recorded in reports, e.g. isbsg, desharnais, cocomo")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="effortcast", description="Software cost estimation pipeline: prompts, baselines, evaluation.")
    parser.add_argument("--version", action="version", version=f"effortcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("ingest", parents=[common], help="load and normalize a CSV, summarize missing values")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("correlate", parents=[common], help="rank features by correlation with the target")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--k", type=int, default=None, help="keep the top k features")

    p = sub.add_parser("stratify", parents=[common], help="write completeness tiers")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--max-missing", type=_int_list, default=(5, 3, 0), help="comma-separated tiers (default 5,3,0)")

    p = sub.add_parser("split", parents=[common], help="seeded train/val/test split, optionally pinning a tier")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--train", type=_fraction)
    p.add_argument("--val", type=_fraction)
    p.add_argument("--test", type=_fraction)
    p.add_argument("--seed", type=int)
    p.add_argument("--pin-max-missing", type=int)
    p.add_argument("--pin-train-frac", type=_fraction)

    p = sub.add_parser("gen-prompts", parents=[common], help="emit a JSONL prompt/completion corpus")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--out", type=Path, required=True, help="corpus .jsonl path")

    p = sub.add_parser("finetune", parents=[common], help="submit a corpus for fine-tuning and wait for the job")
    p.add_argument("--corpus", type=_existing_file, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--provider", choices=PROVIDER_KINDS)
    p.add_argument("--base-model", help="provider model to fine-tune")

    p = sub.add_parser("predict", parents=[common], help="query a (fine-tuned) model for every record")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--provider", choices=PROVIDER_KINDS)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model")
    g.add_argument("--job", type=_existing_file, help="job.json written by finetune")

    p = sub.add_parser("evaluate", parents=[common], help="fit baselines and/or score predictions with MAE/RMSE")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--dataset", type=_existing_file, help="full dataset; split per seed for baselines")
    p.add_argument("--train", type=_existing_file)
    p.add_argument("--test", type=_existing_file)
    p.add_argument("--estimators", type=_estimator_list, help=f"comma-separated from {','.join(ESTIMATORS)}")
    p.add_argument("--seed", type=_int_list, help="comma-separated seeds")
    p.add_argument("--predictions", type=_existing_file, help="predictions.csv written by predict")
    p.add_argument("--predictions-name", default="LLM")
    p.add_argument("--outlier-rule", choices=OUTLIER_RULES)

    p = sub.add_parser("report", parents=[common], help="comparison tables next to the reference values")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--metrics", type=_existing_file, nargs="*", help="metrics.csv files from evaluate")
    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "correlate": cmd_correlate,
    "stratify": cmd_stratify,
    "split": cmd_split,
    "gen-prompts": cmd_gen_prompts,
    "finetune": cmd_finetune,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def _setup_logging(level: str, log_file: Path, env_var: str) -> list[logging.Handler]:
    secret_filter = SecretRedactingFilter(env_var)
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    file_handler = logging.FileHandler(log_file, mode="w", encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    stream = logging.StreamHandler(sys.stderr)
    stream.setLevel(level)
    handlers = [file_handler, stream]
    for h in handlers:
        h.setFormatter(fmt)
        h.addFilter(secret_filter)
        log.addHandler(h)
    log.setLevel(logging.DEBUG)
    return handlers


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        override(cfg, "dataset", schema=args.schema, target_column=args.target_column,
                 id_column=args.id_column, provenance=args.provenance)
    except EffortcastError as exc:
        parser.error(f"--config: {exc}")
    out = Path(args.out)
    out_dir = out.parent if args.command == "gen-prompts" else out
    out_dir.mkdir(parents=True, exist_ok=True)
    handlers = _setup_logging(args.log_level, out_dir / f"{args.command}.log", cfg.provider.api_key_env_var)
    run = Run(args.command, cfg, out_dir, argv)
    try:
        COMMANDS[args.command](run, args)
        run.write_manifest()
        return 0
    except EffortcastError as exc:
        log.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        for h in handlers:
            log.removeHandler(h)
            h.close()


if __name__ == "__main__":
    sys.exit(main())
