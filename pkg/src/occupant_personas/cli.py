"""Command-line pipeline: fetch, prepare, correlations, train, evaluate, predict, persona.

Every command is deterministic under a fixed config and seed; outputs land
under the configured output directory and inputs are never mutated. Exit
codes: 0 success, 1 data/model failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from urllib.parse import urlparse

import numpy as np

from . import evaluation, persona as persona_mod
from .config import (
    MODEL_NAMES,
    RunConfig,
    default_cache_dir,
    file_sha256,
    load_config,
    packaged_data,
)
from .errors import InputError, PipelineError, SnapshotError
from .features import (
    TARGET_CODES,
    DropRules,
    TargetSpec,
    apply_drop_rules,
    separate,
    top_correlates,
)
from .ingest import (
    CleaningRules,
    Codebook,
    Dataset,
    clean,
    encode_text_columns,
    fetch_recs,
    load_table,
    split,
)
from .learners import ModelKind, TrainedModel, load_snapshot, predict, save_snapshot

REAL_SURVEY_COLUMNS = 759
REAL_SURVEY_RETAINED = 389


class SnapshotStore:
    """Directory of model snapshots keyed by (target, model); digest-guarded."""

    def __init__(self, directory: Path, config_digest: str):
        self.directory = Path(directory)
        self.config_digest = config_digest

    def path_for(self, target: str, kind: ModelKind) -> Path:
        return self.directory / f"{target}__{ModelKind(kind).value}.json"

    def save(self, model: TrainedModel, target: str) -> Path:
        model.train_meta["config_digest"] = self.config_digest
        return save_snapshot(model, self.path_for(target, model.kind))

    def load(self, target: str, kind: ModelKind, allow_mismatch: bool = False) -> TrainedModel:
        path = self.path_for(target, kind)
        if not path.exists():
            raise SnapshotError(f"no snapshot for ({target}, {ModelKind(kind).value}) at {path}")
        model = load_snapshot(path)
        found = model.train_meta.get("config_digest")
        if found != self.config_digest and not allow_mismatch:
            raise SnapshotError(
                f"{path}: config digest {found} does not match current {self.config_digest} "
                f"(pass --allow-digest-mismatch to load anyway)"
            )
        return model


# --- shared helpers ---------------------------------------------------------


def _load_prepared(cfg: RunConfig) -> Dataset:
    if not cfg.prepared_path.exists():
        raise PipelineError(f"no prepared dataset at {cfg.prepared_path}; run 'prepare' first")
    return Dataset.load_csv(cfg.prepared_path)


def _split_sets(cfg: RunConfig, data: Dataset) -> tuple[Dataset, Dataset]:
    return split(data, cfg.train_fraction, cfg.seed)


def _store(cfg: RunConfig) -> SnapshotStore:
    sha = file_sha256(cfg.prepared_path, 16) if cfg.prepared_path.exists() else ""
    return SnapshotStore(cfg.snapshots_dir, cfg.digest(sha))


def _target_spec(cfg: RunConfig) -> TargetSpec:
    return TargetSpec.from_json(cfg.codebook_path)


# --- fetch -------------------------------------------------------------------


def cmd_fetch(cfg: RunConfig, args) -> int:
    dest = Path(args.dest) if args.dest else None
    if dest is None:
        name = Path(urlparse(cfg.fetch_url).path).name or "survey.csv"
        dest = (cfg.data_path if cfg.data_path else default_cache_dir() / name)
    cached = dest.exists() and not (cfg.overwrite or args.overwrite)
    path = fetch_recs(cfg.fetch_url, dest, overwrite=cfg.overwrite or args.overwrite)
    table = load_table(path)
    if cached:
        print(f"using cached file {path} ({table.n_rows} rows)")
    else:
        print(f"saved {path} ({table.n_rows} rows)")
    return 0


# --- prepare ------------------------------------------------------------------


def cmd_prepare(cfg: RunConfig, args) -> int:
    raw_path = cfg.data_path
    if getattr(args, "fixture", False):
        raw_path = packaged_data("synthetic_fixture.csv")
    if raw_path is None:
        candidate = default_cache_dir() / Path(urlparse(cfg.fetch_url).path).name
        if candidate.exists():
            raw_path = candidate
        else:
            raise InputError("no input file: pass --data PATH, --fixture, or run 'fetch' first")

    table = load_table(raw_path)
    cleaning = CleaningRules()
    table, text_encodings = encode_text_columns(table, cleaning)
    cleaned = clean(table, cleaning, source=str(raw_path))
    if text_encodings:
        cleaned.provenance["text_encodings"] = text_encodings
        print(f"integer-coded text columns: {sorted(text_encodings)}")
    rules = DropRules.from_json(cfg.drop_rules_path)
    filtered = apply_drop_rules(cleaned, rules)
    codebook = Codebook.from_json(cfg.codebook_path)

    before = _category_counts(cleaned.columns, codebook)
    after = _category_counts(filtered.columns, codebook)
    print(f"prepared {filtered.n_rows} rows; columns {cleaned.n_cols} -> {filtered.n_cols}")
    print("category,original,selected")
    summary_lines = ["category,original,selected"]
    categories = list(Codebook.CATEGORIES) + (["unknown"] if "unknown" in before else [])
    for cat in categories:
        line = f"{cat},{before.get(cat, 0)},{after.get(cat, 0)}"
        print(line)
        summary_lines.append(line)
    if cleaned.n_cols == REAL_SURVEY_COLUMNS and filtered.n_cols != REAL_SURVEY_RETAINED:
        print(
            f"warning: retained {filtered.n_cols} columns; the documented selection "
            f"keeps {REAL_SURVEY_RETAINED} of {REAL_SURVEY_COLUMNS}",
            file=sys.stderr,
        )

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    filtered.save_csv(cfg.prepared_path)
    (cfg.out_dir / "prepare_summary.csv").write_text(
        "\n".join(summary_lines) + "\n", encoding="utf-8"
    )
    print(f"wrote {cfg.prepared_path}")
    return 0


def _category_counts(columns, codebook: Codebook) -> dict[str, int]:
    counts: dict[str, int] = {}
    for col in columns:
        counts[codebook.category_of(col)] = counts.get(codebook.category_of(col), 0) + 1
    return counts


# --- correlations ---------------------------------------------------------------


def cmd_correlations(cfg: RunConfig, args) -> int:
    data = _load_prepared(cfg)
    out = cfg.out_dir / "correlations"
    out.mkdir(parents=True, exist_ok=True)
    for target in cfg.targets:
        report = top_correlates(data, target, k=args.top_k)
        ranked_path = out / f"{target}_ranked.csv"
        with ranked_path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("rank,attribute,r\n")
            for i, (code, r) in enumerate(report.ranked, start=1):
                fh.write(f"{i},{code},{r!r}\n")
        matrix_path = out / f"{target}_matrix.csv"
        with matrix_path.open("w", encoding="utf-8", newline="") as fh:
            members = report.member_codes
            fh.write("," + ",".join(members) + "\n")
            for i, code in enumerate(members):
                fh.write(code + "," + ",".join(repr(float(v)) for v in report.matrix[i]) + "\n")
        top = ", ".join(code for code, _ in report.ranked[:3])
        print(f"{target}: top correlates {top} -> {ranked_path.name}, {matrix_path.name}")
    return 0


# --- train -----------------------------------------------------------------------

_train_ctx: dict = {}


def _init_train_worker(ctx):
    _train_ctx.update(ctx)


def _run_train_cell(job):
    target, kind_value = job
    ctx = _train_ctx
    kind = ModelKind(kind_value)
    seed = evaluation.cell_seed(ctx["seed"], target, kind)
    try:
        fold_accs, cv_mean, model = evaluation.train_cell(
            kind, ctx["X_tr"], ctx["targets_tr"][target], ctx["hp"], ctx["k"],
            seed, ctx["feature_names"], ctx["stratified"],
        )
        model.train_meta["config_digest"] = ctx["config_digest"]
        save_snapshot(model, Path(ctx["snapshot_dir"]) / f"{target}__{kind.value}.json")
        return target, kind_value, [float(a) for a in fold_accs], float(cv_mean), None
    except PipelineError as exc:
        return target, kind_value, None, None, f"{type(exc).__name__}: {exc}"


def cmd_train(cfg: RunConfig, args) -> int:
    data = _load_prepared(cfg)
    spec = _target_spec(cfg)
    train, _ = _split_sets(cfg, data)
    feats, targs = separate(train, spec)
    store = _store(cfg)
    store.directory.mkdir(parents=True, exist_ok=True)

    ctx = {
        "X_tr": feats.matrix,
        "targets_tr": {t: targs.column(t) for t in cfg.targets},
        "hp": cfg.hyperparams,
        "k": cfg.k_folds,
        "seed": cfg.seed,
        "feature_names": feats.columns,
        "stratified": cfg.stratified_folds,
        "config_digest": store.config_digest,
        "snapshot_dir": str(store.directory),
    }
    jobs = [(t, m) for t in cfg.targets for m in cfg.models]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_train_worker,
                                 initargs=(ctx,)) as pool:
            outcomes = list(pool.map(_run_train_cell, jobs))
    else:
        _init_train_worker(ctx)
        outcomes = [_run_train_cell(job) for job in jobs]

    # merge with earlier runs so per-target training sessions accumulate
    merged: dict[tuple[str, str], tuple[float, list[float]]] = {}
    if (cfg.out_dir / "fold_detail.csv").exists():
        merged = {
            key: value for key, value in _read_fold_report(cfg).items()
            if len(value[1]) == cfg.k_folds
        }
    trained = 0
    for target, kind_value, folds, cv_mean, err in outcomes:
        if err is not None:
            print(f"warning: ({target}, {kind_value}) failed: {err}", file=sys.stderr)
            continue
        trained += 1
        folds_text = " ".join(f"{a:.4f}" for a in folds)
        print(f"{target}/{kind_value}: folds [{folds_text}] mean {cv_mean:.4f}")
        merged[(target, kind_value)] = (cv_mean, folds)

    header = "target,model,cv_mean," + ",".join(f"fold_{i + 1}" for i in range(cfg.k_folds))
    report_lines = [header]
    for target in TARGET_CODES:
        for kind_value in MODEL_NAMES:
            if (target, kind_value) in merged:
                cv_mean, folds = merged[(target, kind_value)]
                report_lines.append(
                    f"{target},{kind_value},{cv_mean!r}," + ",".join(repr(a) for a in folds)
                )
    (cfg.out_dir / "fold_detail.csv").write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    print(f"saved {trained} snapshot(s) under {store.directory} (config {store.config_digest})")
    return 0 if trained else 1


# --- evaluate ----------------------------------------------------------------------


def _read_fold_report(cfg: RunConfig) -> dict[tuple[str, str], tuple[float, list[float]]]:
    path = cfg.out_dir / "fold_detail.csv"
    if not path.exists():
        raise PipelineError(f"no CV report at {path}; run 'train' first")
    out = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            folds = [float(v) for k, v in row.items() if k.startswith("fold_")]
            out[(row["target"], row["model"])] = (float(row["cv_mean"]), folds)
    return out


def cmd_evaluate(cfg: RunConfig, args) -> int:
    data = _load_prepared(cfg)
    spec = _target_spec(cfg)
    _, test = _split_sets(cfg, data)
    feats_te, targs_te = separate(test, spec)
    store = _store(cfg)
    cv_report = _read_fold_report(cfg)

    table = evaluation.ResultsTable()
    for target in cfg.targets:
        y_te = targs_te.column(target)
        for kind_value in cfg.models:
            kind = ModelKind(kind_value)
            try:
                model = store.load(target, kind, allow_mismatch=args.allow_digest_mismatch)
                if model.feature_columns != feats_te.columns:
                    raise SnapshotError(
                        f"snapshot feature columns do not match the prepared dataset"
                    )
                if (target, kind_value) not in cv_report:
                    raise PipelineError("missing CV report entry")
                cv_mean, folds = cv_report[(target, kind_value)]
                pred = predict(model, feats_te.matrix)
                table.rows.append(evaluation.MetricsRow(
                    target=target,
                    model=kind,
                    train_accuracy=cv_mean,
                    test_accuracy=evaluation.accuracy(pred, y_te),
                    mae=evaluation.mae(pred, y_te),
                    r2=evaluation.r2(pred, y_te),
                ))
                table.fold_detail[(target, kind_value)] = folds
            except PipelineError as exc:
                table.failures.append(evaluation.CellFailure(target, kind, str(exc)))
                print(f"warning: cell ({target}, {kind_value}) failed: {exc}", file=sys.stderr)

    if not table.rows:
        raise PipelineError("no cell produced results")
    evaluation.results_to_csv(table, cfg.out_dir / "results.csv")
    evaluation.results_to_json(table, cfg.out_dir / "results.json")

    complete = [
        t for t in cfg.targets
        if sum(r.target == t for r in table.rows) == len(cfg.models)
    ]
    skipped = [t for t in cfg.targets if t not in complete]
    if skipped:
        print(f"warning: best scores skip incomplete target(s): {skipped}", file=sys.stderr)
    if complete:
        best = evaluation.best_scores(table, targets=complete)
        evaluation.best_to_csv(best, cfg.out_dir / "best_scores.csv")
        evaluation.best_to_json(best, cfg.out_dir / "best_scores.json")
        for target in complete:
            entry = best.per_target[target]["accuracy"]
            models = "/".join(entry.models)
            print(f"{target}: best test accuracy {entry.value:.4f} ({models})")
        print(
            f"averages: accuracy {best.averages['accuracy']:.6f}, "
            f"mae {best.averages['mae']:.6f}, r2 {best.averages['r2']:.6f}"
        )
    print(f"wrote {cfg.out_dir / 'results.csv'} ({len(table.rows)} rows)")
    return 0


# --- predict / persona ----------------------------------------------------------------


def _chosen_models(cfg: RunConfig, args) -> dict[str, ModelKind]:
    """Best accuracy model per target from the last evaluation, or a forced kind."""
    if getattr(args, "model_override", None):
        return {t: ModelKind(args.model_override) for t in TARGET_CODES}
    best_path = cfg.out_dir / "best_scores.json"
    if not best_path.exists():
        raise PipelineError(
            f"no {best_path}; run 'evaluate' first or force a kind with --use-model"
        )
    doc = json.loads(best_path.read_text(encoding="utf-8"))
    chosen = {}
    for target in TARGET_CODES:
        entry = doc.get("targets", {}).get(target)
        if not entry:
            raise PipelineError(f"best-scores file lacks target {target}; re-run 'evaluate'")
        chosen[target] = ModelKind(entry["accuracy"]["models"][0])
    return chosen


def _input_row(args, feats_te: Dataset) -> tuple[np.ndarray, str, int | None]:
    if args.input_csv:
        path = Path(args.input_csv)
        if not path.exists():
            raise InputError(f"no such input file: {path}")
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            try:
                values = [float(c) for c in next(reader)]
            except StopIteration:
                raise InputError(f"{path}: expected a data row after the header") from None
        if header != feats_te.columns:
            raise InputError(
                f"{path}: feature columns do not match the prepared dataset"
            )
        return np.asarray(values, dtype=np.float64), path.stem, None
    idx = args.row_index
    if idx is None:
        raise InputError("pass --row-index N (test split row) or --input-csv FILE")
    if not 0 <= idx < feats_te.n_rows:
        raise InputError(f"row index {idx} outside the test split (0..{feats_te.n_rows - 1})")
    return feats_te.matrix[idx], f"row{idx}", idx


def _assemble_prediction(cfg: RunConfig, args) -> tuple[persona_mod.PredictionVector, str, int | None, Dataset]:
    data = _load_prepared(cfg)
    spec = _target_spec(cfg)
    _, test = _split_sets(cfg, data)
    feats_te, _ = separate(test, spec)
    chosen = _chosen_models(cfg, args)
    store = _store(cfg)

    row, row_id, row_index = _input_row(args, feats_te)
    missing = [
        t for t in TARGET_CODES
        if not store.path_for(t, chosen[t]).exists()
    ]
    if missing:
        raise PipelineError(f"snapshot store lacks models for: {missing}")
    values: dict[str, int] = {}
    provenance: dict[str, dict] = {}
    X = row.reshape(1, -1)
    for target in TARGET_CODES:
        model = store.load(target, chosen[target],
                           allow_mismatch=getattr(args, "allow_digest_mismatch", False))
        pred = predict(model, X)
        values[target] = int(pred[0])
        provenance[target] = {
            "model": model.kind.value,
            "snapshot_digest": model.digest(),
        }
    return persona_mod.PredictionVector(values, provenance), row_id, row_index, test


def cmd_predict(cfg: RunConfig, args) -> int:
    vector, row_id, _, _ = _assemble_prediction(cfg, args)
    doc = {
        "format_version": 1,
        "values": vector.values,
        "provenance": vector.provenance,
    }
    out = cfg.out_dir / f"prediction_{row_id}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    for target in TARGET_CODES:
        print(f"{target}: {vector.values[target]} ({vector.provenance[target]['model']})")
    print(f"wrote {out}")
    return 0


_FORMAT_EXT = {"structured-text": "json", "markdown": "md", "plain": "txt"}


def cmd_persona(cfg: RunConfig, args) -> int:
    vector, row_id, row_index, test = _assemble_prediction(cfg, args)
    labels = persona_mod.LabelMap.from_json(cfg.label_map_path)
    annotations = {}
    if row_index is not None:
        age_raw = test.provenance.get("age_raw")
        if age_raw is not None and 0 <= row_index < len(age_raw) and age_raw[row_index] >= 0:
            annotations["reported_age"] = f"{int(age_raw[row_index])} years"
    card = persona_mod.build_persona(
        vector, labels,
        name_seed=cfg.seed + (row_index or 0),
        annotations=annotations,
    )
    out_dir = cfg.out_dir / "personas"
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = args.formats or ["structured-text"]
    for fmt in formats:
        text = persona_mod.render(card, fmt)
        path = out_dir / f"persona_{row_id}.{_FORMAT_EXT[fmt]}"
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")
    print()
    print(card.narrative)
    return 0


# --- argument parsing ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--data", help="raw survey CSV path")
    common.add_argument("--url", help="fetch URL for the survey CSV")
    common.add_argument("--target", action="append", choices=TARGET_CODES,
                        dest="targets", metavar="TARGET", type=str.upper,
                        help="restrict to a target (repeatable)")
    common.add_argument("--model", action="append", choices=MODEL_NAMES,
                        dest="models", metavar="MODEL", type=str.upper,
                        help="restrict to a model kind (repeatable)")
    common.add_argument("--fraction", type=float, help="training fraction (default 0.8)")
    common.add_argument("--k", type=int, help="cross-validation fold count (default 10)")
    common.add_argument("--workers", type=int, help="parallel worker processes (default 1)")
    common.add_argument("--stratified", action="store_true", default=None,
                        help="use class-stratified CV folds")
    common.add_argument("--drop-rules", help="drop-rules JSON path")
    common.add_argument("--codebook", help="codebook JSON path")
    common.add_argument("--label-map", help="label-map JSON path")
    common.add_argument("--hp-json", help="hyperparameter overrides as a JSON object")

    parser = argparse.ArgumentParser(
        prog="occupant-personas",
        description="Survey-to-persona pipeline: clean microdata, train six classifiers "
                    "per occupant characteristic, evaluate, and synthesize persona cards.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", parents=[common], help="download the survey CSV")
    p.add_argument("--dest", help="destination file (default: cache directory)")
    p.add_argument("--overwrite", action="store_true", help="re-download even if cached")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("prepare", parents=[common],
                       help="clean the raw file and apply the drop rules")
    p.add_argument("--fixture", action="store_true",
                   help="use the bundled synthetic fixture as input")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("correlations", parents=[common],
                       help="rank the most correlated attributes per target")
    p.add_argument("--top-k", type=int, default=10, help="correlates per target (default 10)")
    p.set_defaults(func=cmd_correlations)

    p = sub.add_parser("train", parents=[common],
                       help="cross-validate and snapshot every (target, model)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score snapshots on the test split; write results and best scores")
    p.add_argument("--allow-digest-mismatch", action="store_true",
                   help="load snapshots trained under a different config")
    p.set_defaults(func=cmd_evaluate)

    for name, fn in (("predict", cmd_predict), ("persona", cmd_persona)):
        p = sub.add_parser(name, parents=[common],
                           help="assemble the 16 predicted characteristics for one row"
                           if name == "predict" else
                           "build and render a persona card for one row")
        p.add_argument("--row-index", type=int, help="0-based row of the test split")
        p.add_argument("--input-csv", help="CSV with a feature header plus one row")
        p.add_argument("--use-model", choices=MODEL_NAMES, dest="model_override",
                       type=str.upper, help="force one model kind for all targets")
        p.add_argument("--allow-digest-mismatch", action="store_true")
        if name == "persona":
            p.add_argument("--format", action="append", dest="formats",
                           choices=sorted(_FORMAT_EXT), metavar="FORMAT",
                           help="render format (repeatable; default structured-text)")
        p.set_defaults(func=fn)

    return parser


def _config_from_args(args) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "data_path": args.data,
        "fetch_url": args.url,
        "targets": args.targets,
        "models": args.models,
        "train_fraction": args.fraction,
        "k_folds": args.k,
        "workers": args.workers,
        "stratified_folds": args.stratified,
        "drop_rules_path": args.drop_rules,
        "codebook_path": args.codebook,
        "label_map_path": args.label_map,
    }
    if args.hp_json:
        try:
            overrides["hyperparams"] = json.loads(args.hp_json)
        except json.JSONDecodeError as exc:
            raise InputError(f"--hp-json is not valid JSON: {exc}") from exc
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return args.func(cfg, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
