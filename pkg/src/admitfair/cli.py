"""Command-line entry point: ``admitfair <subcommand> [--seed N] [--config FILE] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd

from . import __version__
from .data import DataError, clean_anomalies, parse_csv
from .evaluation import compute_metrics, kfold_cv, select_best, stratified_split
from .explain import coefficient_importance, permutation_importance
from .fairness import SensitiveAttribute, audit
from .llm import LLM_FEATURE, MockScorer, RemoteScorer, ScoreCache, StatementTemplate, score_table, statements_csv
from .models import MODEL_KINDS, LogisticRegressionGD
from .pipeline import (FittedPipeline, PipelineConfig, PipelineError, _model_factory, _prepare_table, _vectorizer,
                       export_report, run_pipeline)
from .report_schema import validate_report
from .synthetic import ConfigError, SyntheticConfig, generate_sources

logger = logging.getLogger("admitfair")


class UsageError(Exception):
    """Bad invocation detected after parsing; exits 2."""


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _out(args) -> Path:
    return Path(args.out or ".")


def _config(args) -> PipelineConfig:
    """Config file when given, else defaults; ``--seed`` always wins."""
    if args.config:
        cfg = PipelineConfig.from_file(args.config)
    else:
        cfg = PipelineConfig(synthetic={})
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _load_table(cfg: PipelineConfig, path):
    table = parse_csv(path)
    prepared, _ = _prepare_table(cfg, [(table, Path(path).stem)])
    return prepared


def cmd_generate(args) -> int:
    base = {}
    if args.config:
        base = dict(PipelineConfig.from_file(args.config).synthetic or {})
    for key in ("rows", "anomalies", "noise", "noise_features", "hs_rows", "sec_rows", "ug_rows"):
        value = getattr(args, key)
        if value is not None:
            base["grad_rows" if key == "rows" else key] = value
    syn = SyntheticConfig.from_mapping(base)
    seed = args.seed if args.seed is not None else 0
    for flag, table in generate_sources(syn, seed).items():
        path = _write(_out(args) / f"{flag}.csv", table.to_csv())
        print(f"wrote {path} ({len(table)} rows)")
    return 0


def cmd_clean(args) -> int:
    cfg = _config(args)
    rule = cfg.cleaning_rule()
    if rule is None:
        raise UsageError("cleaning is disabled in the config")
    table = parse_csv(args.input)
    cleaned, log = clean_anomalies(table, rule)
    out = _out(args)
    _write(out / "cleaned.csv", cleaned.to_csv())
    _write(out / "cleaning_log.json", log.to_json() + "\n")
    print(f"{log.rows_before} -> {log.rows_after} rows ({len(log.removed_row_ids)} removed)")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    table = _load_table(cfg, args.input)
    vectorizer = _vectorizer(cfg, table)
    fm = vectorizer.transform(table)
    train, test = stratified_split(fm, cfg.cv_config().train_fraction, cfg.seed)
    kind = args.model
    if kind == "auto":
        cv = {k: kfold_cv(train, _model_factory(cfg, k), cfg.cv_config())[1] for k in cfg.models}
        kind = select_best(cv)
    estimator = _model_factory(cfg, kind)().fit(train.to_frame(), train.labels)
    fitted = FittedPipeline(vectorizer, estimator)
    out = _out(args)
    _write(out / "model.json", json.dumps(fitted.to_dict(), sort_keys=True) + "\n")
    split = {"seed": cfg.seed, "train": [int(i) for i in train.row_ids], "test": [int(i) for i in test.row_ids]}
    _write(out / "split.json", json.dumps(split) + "\n")
    print(f"trained {kind} on {len(train)} rows; held out {len(test)}")
    return 0


def _rows(table, ids_path):
    if not ids_path:
        return table
    with open(ids_path) as fh:
        ids = json.load(fh)["test"]
    return table.select_rows(ids)


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    table = _load_table(cfg, args.input)
    out = _out(args)
    if args.model is None:
        # no fitted model: cross-validate every configured kind
        fm = _vectorizer(cfg, table).transform(table)
        summaries = {k: kfold_cv(fm, _model_factory(cfg, k), cfg.cv_config(), Path(args.input).stem)[1]
                     for k in cfg.models}
        payload = {"cv": {k: v.to_dict() for k, v in summaries.items()}, "selected_model": select_best(summaries)}
        _write(out / "cv.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
        for k, v in summaries.items():
            print(f"{k}: {v.accuracy:.4f}")
        return 0
    fitted = FittedPipeline.load(args.model)
    table = _rows(table, args.split)
    fm = fitted.features(table)
    score = fitted.predict_proba(fm)
    pred = (score >= 0.5).astype(int)
    report = compute_metrics(fm.labels, pred, score, fitted.estimator.steps[-1][1].kind, Path(args.input).stem)
    predictions = pd.DataFrame({"row_id": fm.row_ids, "y_true": fm.labels, "y_score": score, "y_pred": pred})
    for name, values in fm.sensitive.items():
        predictions[name] = values
    _write(out / "evaluation.json", json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    _write(out / "predictions.csv", predictions.to_csv(index=False, float_format=repr, lineterminator="\n"))
    print(f"accuracy {report.accuracy:.4f} on {report.n} rows")
    return 0


def cmd_audit(args) -> int:
    cfg = _config(args)
    frame = pd.read_csv(args.predictions, keep_default_na=False)
    for col in ("y_true", "y_pred"):
        if col not in frame:
            raise UsageError(f"predictions file lacks column {col!r}")
    names = [n for n in (args.attribute or cfg.sensitive) if n in frame]
    if not names:
        raise UsageError("predictions file has none of the sensitive attribute columns")
    attributes = [SensitiveAttribute.from_column(n, frame[n].astype(str).to_numpy(), cfg.group_maps.get(n))
                  for n in names]
    tau = args.tau if args.tau is not None else cfg.tau
    reports = audit(frame["y_pred"].to_numpy(), frame["y_true"].to_numpy(), attributes, tau)
    _write(_out(args) / "fairness.json", json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")
    for r in reports:
        print(f"{r.attribute}: dp_gap={r.dp_gap:.4f} eo_gap={r.eo_gap:.4f} flagged={r.flagged}")
    return 0


def cmd_explain(args) -> int:
    cfg = _config(args)
    fitted = FittedPipeline.load(args.model)
    clf = fitted.estimator.steps[-1][1]
    if isinstance(clf, LogisticRegressionGD) and not args.permutation:
        explanation = coefficient_importance(fitted.estimator)
    else:
        if not args.input:
            raise UsageError(f"permutation importance for {clf.kind} needs --input")
        table = _rows(_load_table(cfg, args.input), args.split)
        fm = fitted.features(table)
        explanation = permutation_importance(fitted.estimator, fm.to_frame(), fm.labels, args.repeats, cfg.seed)
    out = _out(args)
    _write(out / "explanation.json", json.dumps(explanation.to_dict(), indent=2, sort_keys=True) + "\n")
    _write(out / "importance.csv", explanation.to_csv())
    for e in explanation.entries[:5]:
        print(f"{e.rank}. {e.feature} {e.importance:.4f}")
    return 0


def cmd_augment(args) -> int:
    cfg = _config(args)
    table = parse_csv(args.input)
    settings = cfg.llm or {}
    template = StatementTemplate(settings.get("template", StatementTemplate().text))
    if args.scorer == "mock":
        scorer = MockScorer.fit(table)
    else:
        scorer = RemoteScorer.from_env(**{k: settings[k] for k in ("url", "timeout", "rubric") if k in settings})
    cache = ScoreCache(args.cache_dir) if args.cache_dir else None
    statements, scores = score_table(table, scorer, template, cache, args.workers)
    augmented = table.with_column(LLM_FEATURE, np.asarray([s.score for s in scores]), "numeric")
    out = _out(args)
    _write(out / "augmented.csv", augmented.to_csv())
    _write(out / "statements.csv", statements_csv(statements, scores))
    print(f"scored {len(scores)} rows with {scorer.scorer_id}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.out:
        cfg.output_dir = args.out
    out = Path(cfg.output_dir or "admitfair-out")
    bundle = run_pipeline(cfg)
    export_report(bundle, out)
    print(f"selected {bundle.selected_model}; test accuracy {bundle.test_report.accuracy:.4f}; bundle in {out}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.bundle) / "report.json"
    with open(path) as fh:
        report = json.load(fh)
    validate_report(report)
    lines = [f"admitfair report (schema {report['schema_version']}, seed {report['seed']})",
             f"rows: {report['data']['rows']}", f"selected model: {report['selected_model']}",
             "cross-validated accuracy (uncleaned -> cleaned):"]
    before = report["cv"]["uncleaned"] or {}
    for kind, summary in report["cv"]["cleaned"].items():
        prior = f"{before[kind]['accuracy']:.4f}" if kind in before else "n/a"
        lines.append(f"  {kind}: {prior} -> {summary['accuracy']:.4f}")
    lines.append(f"test accuracy: {report['test']['accuracy']:.4f}  auroc: {report['test']['auroc']}")
    for f in report["fairness"]:
        lines.append(f"fairness {f['attribute']}: dp_gap={f['dp_gap']:.4f} eo_gap={f['eo_gap']:.4f}"
                     f" flagged={f['flagged']}")
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(Path(args.out) / "summary.txt", text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--config", help="YAML pipeline config")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="admitfair", description="Fairness-aware admission prediction pipeline.")
    parser.add_argument("--version", action="version", version=f"admitfair {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("generate", parents=[common], help="write synthetic source CSVs")
    p.add_argument("--rows", type=int)
    p.add_argument("--anomalies", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--noise-features", type=int)
    p.add_argument("--hs-rows", type=int)
    p.add_argument("--sec-rows", type=int)
    p.add_argument("--ug-rows", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("clean", parents=[common], help="remove label/profile contradictions")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("train", parents=[common], help="fit one model kind on a stratified training split")
    p.add_argument("--input", required=True)
    p.add_argument("--model", default="auto", choices=["auto", *MODEL_KINDS])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a saved model, or cross-validate all kinds")
    p.add_argument("--input", required=True)
    p.add_argument("--model", help="model.json from train; omit to run k-fold CV")
    p.add_argument("--split", help="split.json from train; evaluates its test rows only")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit", parents=[common], help="fairness gaps from a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--attribute", action="append")
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("explain", parents=[common], help="feature importance of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", help="rows for permutation importance")
    p.add_argument("--split", help="split.json; restricts to its test rows")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--permutation", action="store_true", help="force permutation importance")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("augment", parents=[common], help="append the LLM_score column")
    p.add_argument("--input", required=True)
    p.add_argument("--scorer", choices=["mock", "remote"], default="mock")
    p.add_argument("--cache-dir")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("run", parents=[common], help="full pipeline and report bundle")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", parents=[common], help="validate and summarize a bundle")
    p.add_argument("--bundle", required=True, help="directory holding report.json")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (PipelineError, DataError, ConfigError, jsonschema.ValidationError, ValueError, TypeError, KeyError,
            OSError) as exc:
        print(f"admitfair {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
