"""Cross-validation protocol, scoring metrics, and the target-by-model suite.

The protocol: the training split is scored by k-fold cross-validation (the
reported train accuracy is the mean of the fold validation accuracies), then
a final model refit on the whole training split is scored on the held-out
test split for accuracy, mean absolute error, and R^2. Per-cell seeds derive
from (master seed, target, model) so results are schedule-independent.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, PipelineError, UndefinedStatisticError
from .features import TARGET_CODES, TargetSpec, separate
from .ingest import Dataset
from .learners import MODEL_ORDER, Hyperparams, ModelKind, fit, predict


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every row index to one of k folds."""

    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        sizes = np.bincount(self.assignments, minlength=self.k)
        if sizes.size != self.k or sizes.max() - sizes.min() > 1 or sizes.min() == 0:
            raise InputError("fold sizes must differ by at most 1 and be non-empty")

    @property
    def n(self) -> int:
        return self.assignments.shape[0]

    def fold_members(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def fold_rest(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def kfold(n: int, k: int = 10, seed: int = 0) -> FoldPlan:
    """Shuffled balanced fold assignment; fold sizes are floor(n/k) or ceil(n/k)."""
    if k < 2 or k > n:
        raise InputError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    base, rem = divmod(n, k)
    pos = 0
    for fold in range(k):
        size = base + (1 if fold < rem else 0)
        assignments[perm[pos:pos + size]] = fold
        pos += size
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def stratified_kfold(y, k: int, seed: int = 0) -> FoldPlan:
    """Class-aware folds: members of each class are dealt around a shared cycle."""
    y = np.asarray(y)
    n = y.shape[0]
    if k < 2 or k > n:
        raise InputError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=np.int64)
    fold = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        rng.shuffle(members)
        for m in members:
            assignments[m] = fold
            fold = (fold + 1) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def accuracy(pred, actual) -> float:
    """Share of predictions equal to the actual labels."""
    pred, actual = _paired_vectors(pred, actual)
    return float(np.count_nonzero(pred == actual)) / pred.shape[0]


def error_rate(pred, actual) -> float:
    """Complement of accuracy; the two sum to 1 exactly."""
    return 1.0 - accuracy(pred, actual)


def mae(pred, actual) -> float:
    """Mean absolute difference between predicted and actual numeric codes."""
    pred, actual = _paired_vectors(pred, actual)
    return float(np.abs(actual.astype(np.float64) - pred.astype(np.float64)).mean())


def r2(pred, actual) -> float:
    """1 - residual/total variance around the actual mean; negative when worse."""
    pred, actual = _paired_vectors(pred, actual)
    if pred.shape[0] < 2:
        raise InputError("r2 needs at least 2 observations")
    a = actual.astype(np.float64)
    p = pred.astype(np.float64)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedStatisticError("r2 undefined: actual values have zero variance")
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


def _paired_vectors(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    actual = np.asarray(actual)
    if pred.ndim != 1 or actual.ndim != 1 or pred.shape != actual.shape:
        raise InputError("prediction and actual vectors must be 1-D and equal length")
    if pred.shape[0] == 0:
        raise InputError("empty vectors")
    return pred, actual


def cell_seed(master_seed: int, target: str, kind: ModelKind) -> int:
    """Stable per-(target, model) seed derived from the master seed."""
    tag = hashlib.sha256(f"{target}:{ModelKind(kind).value}".encode()).digest()
    material = [int(master_seed) & 0xFFFFFFFF, int.from_bytes(tag[:4], "big")]
    return int(np.random.SeedSequence(material).generate_state(1)[0])


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, fold]).generate_state(1)[0])


def cross_validate(kind: ModelKind, X, y, plan: FoldPlan,
                   hp: Hyperparams | None = None, seed: int = 0):
    """Per-fold validation accuracies and their mean.

    Each fold's model trains on every row outside the fold and is scored on
    the fold. Classes absent from a fold's training portion simply score as
    wrong when they appear in the fold.
    """
    y = np.asarray(y)
    if plan.n != y.shape[0]:
        raise InputError(f"fold plan covers {plan.n} rows, data has {y.shape[0]}")
    fold_accs = np.empty(plan.k, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    for fold in range(plan.k):
        val = plan.fold_members(fold)
        tr = plan.fold_rest(fold)
        model = fit(kind, X[tr], y[tr], hp, seed=_fold_seed(seed, fold))
        fold_accs[fold] = accuracy(predict(model, X[val]), y[val])
    return fold_accs, float(fold_accs.mean())


@dataclass(frozen=True)
class MetricsRow:
    target: str
    model: ModelKind
    train_accuracy: float
    test_accuracy: float
    mae: float
    r2: float


@dataclass(frozen=True)
class CellFailure:
    target: str
    model: ModelKind
    reason: str


@dataclass
class ResultsTable:
    rows: list[MetricsRow] = field(default_factory=list)
    fold_detail: dict[tuple[str, str], list[float]] = field(default_factory=dict)
    failures: list[CellFailure] = field(default_factory=list)

    def row(self, target: str, kind: ModelKind) -> MetricsRow:
        for r in self.rows:
            if r.target == target and r.model == kind:
                return r
        raise InputError(f"no row for ({target}, {ModelKind(kind).value})")

    def targets(self) -> list[str]:
        seen = {r.target for r in self.rows}
        return [t for t in TARGET_CODES if t in seen] + sorted(
            t for t in seen if t not in TARGET_CODES
        )

    def models(self) -> list[ModelKind]:
        seen = {r.model for r in self.rows}
        return [m for m in MODEL_ORDER if m in seen]


@dataclass(frozen=True)
class BestEntry:
    value: float
    models: tuple[str, ...]


@dataclass
class BestScores:
    per_target: dict[str, dict[str, BestEntry]]
    averages: dict[str, float]


def train_cell(kind: ModelKind, X_tr, y_tr, hp, k, seed, feature_names,
               stratified: bool = False):
    """Cross-validate on the training split, then refit on all of it."""
    plan = stratified_kfold(y_tr, k, seed) if stratified else kfold(len(y_tr), k, seed)
    fold_accs, cv_mean = cross_validate(kind, X_tr, y_tr, plan, hp, seed)
    model = fit(kind, X_tr, y_tr, hp, seed=seed, feature_names=feature_names)
    return fold_accs, cv_mean, model


def evaluate_cell(kind: ModelKind, target: str, X_tr, y_tr, X_te, y_te, hp, k,
                  seed, feature_names, stratified: bool = False):
    fold_accs, cv_mean, model = train_cell(
        kind, X_tr, y_tr, hp, k, seed, feature_names, stratified
    )
    pred = predict(model, X_te)
    row = MetricsRow(
        target=target,
        model=ModelKind(kind),
        train_accuracy=cv_mean,
        test_accuracy=accuracy(pred, y_te),
        mae=mae(pred, y_te),
        r2=r2(pred, y_te),
    )
    return row, fold_accs, model


_worker_ctx: dict = {}


def _init_worker(ctx):
    _worker_ctx.update(ctx)


def _run_cell(job):
    target, kind_value = job
    ctx = _worker_ctx
    kind = ModelKind(kind_value)
    seed = cell_seed(ctx["seed"], target, kind)
    try:
        row, fold_accs, _ = evaluate_cell(
            kind, target,
            ctx["X_tr"], ctx["targets_tr"][target],
            ctx["X_te"], ctx["targets_te"][target],
            ctx["hp"], ctx["k"], seed, ctx["feature_names"], ctx["stratified"],
        )
        return target, kind_value, row, list(map(float, fold_accs)), None
    except PipelineError as exc:
        return target, kind_value, None, None, f"{type(exc).__name__}: {exc}"


def evaluate_suite(train: Dataset, test: Dataset, spec: TargetSpec,
                   hp: Hyperparams | None = None, seed: int = 0, k: int = 10,
                   targets=None, models=None, stratified: bool = False,
                   workers: int = 1) -> ResultsTable:
    """Run the full (target x model) protocol; one failing cell does not abort."""
    if train.columns != test.columns:
        raise InputError("train and test datasets must share identical columns")
    hp = hp or Hyperparams()
    targets = list(targets) if targets else list(spec.codes)
    unknown = [t for t in targets if t not in spec.codes]
    if unknown:
        raise InputError(f"not target variables: {unknown}")
    models = [ModelKind(m) for m in models] if models else list(MODEL_ORDER)

    feats_tr, targ_tr = separate(train, spec)
    feats_te, targ_te = separate(test, spec)
    leaked = set(feats_tr.columns) & set(spec.codes)
    if leaked:  # structural invariant: targets never reach the feature side
        raise InputError(f"target columns leaked into the features: {sorted(leaked)}")

    ctx = {
        "X_tr": feats_tr.matrix,
        "X_te": feats_te.matrix,
        "targets_tr": {t: targ_tr.column(t) for t in targets},
        "targets_te": {t: targ_te.column(t) for t in targets},
        "hp": hp,
        "k": k,
        "seed": seed,
        "feature_names": feats_tr.columns,
        "stratified": stratified,
    }
    jobs = [(t, m.value) for t in targets for m in models]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(ctx,)) as pool:
            outcomes = list(pool.map(_run_cell, jobs))
    else:
        _init_worker(ctx)
        outcomes = [_run_cell(job) for job in jobs]

    table = ResultsTable()
    by_key = {(t, m): (row, folds, err) for t, m, row, folds, err in outcomes}
    for t in targets:
        for m in models:
            row, folds, err = by_key[(t, m.value)]
            if err is not None:
                table.failures.append(CellFailure(t, m, err))
            else:
                table.rows.append(row)
                table.fold_detail[(t, m.value)] = folds
    return table


def best_scores(table: ResultsTable, targets=None) -> BestScores:
    """Per-target best test accuracy, MAE, and R^2 with the winning model(s)."""
    if not table.rows:
        raise InputError("results table is empty")
    targets = list(targets) if targets else table.targets()
    models = table.models()
    per_target: dict[str, dict[str, BestEntry]] = {}
    for t in targets:
        rows = [r for r in table.rows if r.target == t]
        if len(rows) < len(models):
            have = {r.model for r in rows}
            raise InputError(
                f"results incomplete for {t}: missing "
                f"{[m.value for m in models if m not in have]}"
            )
        per_target[t] = {
            "accuracy": _best(rows, "test_accuracy", best=max),
            "mae": _best(rows, "mae", best=min),
            "r2": _best(rows, "r2", best=max),
        }
    averages = {
        metric: float(np.mean([per_target[t][metric].value for t in targets]))
        for metric in ("accuracy", "mae", "r2")
    }
    return BestScores(per_target=per_target, averages=averages)


def _best(rows: list[MetricsRow], attr: str, best) -> BestEntry:
    value = best(getattr(r, attr) for r in rows)
    winners = tuple(
        m.value for m in MODEL_ORDER
        if any(r.model == m and getattr(r, attr) == value for r in rows)
    )
    return BestEntry(value=value, models=winners)


# --- exports ---------------------------------------------------------------

RESULTS_CSV_HEADER = "target,model,train_acc,test_acc,mae,r2"


def results_to_csv(table: ResultsTable, path: str | Path) -> Path:
    path = Path(path)
    lines = [RESULTS_CSV_HEADER]
    for row in table.rows:
        lines.append(
            f"{row.target},{row.model.value},{row.train_accuracy!r},"
            f"{row.test_accuracy!r},{row.mae!r},{row.r2!r}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def results_to_json(table: ResultsTable, path: str | Path) -> Path:
    doc = {
        "format_version": 1,
        "rows": [
            {
                "target": r.target,
                "model": r.model.value,
                "train_acc": r.train_accuracy,
                "test_acc": r.test_accuracy,
                "mae": r.mae,
                "r2": r.r2,
            }
            for r in table.rows
        ],
        "failures": [
            {"target": f.target, "model": f.model.value, "reason": f.reason}
            for f in table.failures
        ],
    }
    path = Path(path)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def fold_detail_to_csv(table: ResultsTable, k: int, path: str | Path) -> Path:
    path = Path(path)
    header = "target,model," + ",".join(f"fold_{i + 1}" for i in range(k))
    lines = [header]
    for (target, model), folds in table.fold_detail.items():
        lines.append(f"{target},{model}," + ",".join(repr(v) for v in folds))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def best_to_csv(best: BestScores, path: str | Path) -> Path:
    path = Path(path)
    lines = ["target,test_accuracy,accuracy_models,mae,mae_models,r2,r2_models"]
    for target, entries in best.per_target.items():
        acc, err, r2v = entries["accuracy"], entries["mae"], entries["r2"]
        lines.append(
            f"{target},{acc.value!r},{';'.join(acc.models)},"
            f"{err.value!r},{';'.join(err.models)},"
            f"{r2v.value!r},{';'.join(r2v.models)}"
        )
    avg = best.averages
    lines.append(f"AVERAGE,{avg['accuracy']!r},,{avg['mae']!r},,{avg['r2']!r},")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def best_to_json(best: BestScores, path: str | Path) -> Path:
    doc = {
        "format_version": 1,
        "targets": {
            t: {
                metric: {"value": e.value, "models": list(e.models)}
                for metric, e in entries.items()
            }
            for t, entries in best.per_target.items()
        },
        "averages": best.averages,
    }
    path = Path(path)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
