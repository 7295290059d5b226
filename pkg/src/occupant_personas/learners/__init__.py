"""Six multiclass classifiers behind one fit/predict contract.

Every model is trained from scratch here (no external ML toolkit): Gaussian
discriminant analysis, brute-force nearest neighbors, a gini decision tree,
a linear one-vs-rest max-margin classifier, boosted stumps, and a bootstrap
forest. Fitting is deterministic for a fixed (kind, X, y, hyperparams, seed)
and models serialize to versioned JSON snapshots.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import InputError, ModelError, SnapshotError
from . import boost, forest, knn, lda, svm, tree
from .boost import adaboost_round, samme_alpha
from .knn import knn_predict
from .lda import lda_fit
from .svm import svm_fit_ovr
from .tree import gini

__all__ = [
    "ModelKind",
    "Hyperparams",
    "TrainedModel",
    "fit",
    "predict",
    "save_snapshot",
    "load_snapshot",
    "gini",
    "knn_predict",
    "lda_fit",
    "svm_fit_ovr",
    "adaboost_round",
    "samme_alpha",
]

SNAPSHOT_FORMAT_VERSION = 1


class ModelKind(str, Enum):
    LDA = "LDA"
    KNN = "KNN"
    CART = "CART"
    SVM = "SVM"
    ADB = "ADB"
    RFC = "RFC"


MODEL_ORDER = (
    ModelKind.LDA,
    ModelKind.KNN,
    ModelKind.CART,
    ModelKind.SVM,
    ModelKind.ADB,
    ModelKind.RFC,
)


@dataclass(frozen=True)
class Hyperparams:
    """Pinned default configuration for all six model kinds.

    Tree growth always splits on gini impurity. The forest reuses the tree's
    depth/min-split settings for its members. The margin classifier follows
    the step schedule eta_t = 1 / (regularization * (t + 1)).
    """

    knn_k: int = 5
    cart_max_depth: int | None = None  # None = unlimited
    cart_min_samples_split: int = 2
    rfc_n_trees: int = 100
    rfc_features_per_split: int | None = None  # None = floor(sqrt(n_features))
    rfc_bootstrap: bool = True
    adb_n_rounds: int = 50
    svm_regularization: float = 1e-4
    svm_epochs: int = 10
    lda_epsilon: float | None = None  # None = 1e-6 * trace(cov) / n_features

    def __post_init__(self):
        for name in ("knn_k", "cart_min_samples_split", "rfc_n_trees", "adb_n_rounds", "svm_epochs"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.svm_regularization <= 0:
            raise InputError("svm_regularization must be > 0")
        if self.lda_epsilon is not None and self.lda_epsilon < 0:
            raise InputError("lda_epsilon must be >= 0")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def override(self, **kwargs) -> "Hyperparams":
        return replace(self, **kwargs)


@dataclass
class TrainedModel:
    """A fitted classifier snapshot of one of the six kinds."""

    kind: ModelKind
    class_set: np.ndarray  # sorted raw class codes, int64
    feature_columns: tuple[str, ...]
    hyperparams: Hyperparams
    payload: dict
    train_meta: dict = field(default_factory=dict)

    def snapshot_doc(self) -> dict:
        return {
            "format_version": SNAPSHOT_FORMAT_VERSION,
            "kind": self.kind.value,
            "class_set": [int(c) for c in self.class_set],
            "feature_columns": list(self.feature_columns),
            "hyperparams": asdict(self.hyperparams),
            "train_meta": self.train_meta,
            "payload": _payload_doc(self.kind, self.payload, self.class_set),
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot_doc(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def _as_int_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n:
        raise ModelError(f"label vector must have one entry per row ({n})")
    if y.dtype.kind == "f":
        if not np.isfinite(y).all() or not np.all(np.mod(y, 1) == 0):
            raise ModelError("labels must be integer class codes")
        return y.astype(np.int64)
    if y.dtype.kind not in ("i", "u"):
        raise ModelError(f"labels must be numeric class codes, got dtype {y.dtype}")
    return y.astype(np.int64)


def fit(kind: ModelKind, X, y, hp: Hyperparams | None = None, seed: int = 0,
        feature_names=None) -> TrainedModel:
    """Train one classifier; deterministic for fixed (kind, X, y, hp, seed)."""
    kind = ModelKind(kind)
    hp = hp or Hyperparams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ModelError("feature matrix must be 2-D")
    n, d = X.shape
    if n < 2:
        raise ModelError(f"need at least 2 training rows, got {n}")
    if not np.isfinite(X).all():
        raise ModelError("feature matrix contains non-finite values")
    y_int = _as_int_labels(y, n)
    class_set = np.unique(y_int)
    y_idx = np.searchsorted(class_set, y_int).astype(np.int64)
    n_classes = int(class_set.size)
    if feature_names is None:
        feature_names = tuple(f"f{j:03d}" for j in range(d))
    else:
        feature_names = tuple(feature_names)
        if len(feature_names) != d:
            raise ModelError(
                f"{len(feature_names)} feature names for {d} columns"
            )

    train_meta: dict = {"seed": int(seed), "hyperparams_digest": hp.digest()}

    if kind is ModelKind.LDA:
        means, priors, chol, epsilon = lda.lda_fit(X, y_idx, n_classes, hp.lda_epsilon)
        payload = {"means": means, "priors": priors, "covariance_cholesky": chol,
                   "epsilon": epsilon}
    elif kind is ModelKind.KNN:
        if hp.knn_k > n:
            raise ModelError(f"knn_k={hp.knn_k} exceeds the {n} training rows")
        payload = {"train_x": X.copy(), "train_y_idx": y_idx.copy()}
    elif kind is ModelKind.CART:
        grown = tree.grow_tree(
            X, y_idx, n_classes, max_depth=hp.cart_max_depth,
            min_samples_split=hp.cart_min_samples_split,
        )
        payload = {"tree": grown}
    elif kind is ModelKind.RFC:
        mtry = hp.rfc_features_per_split or forest.default_mtry(d)
        trees, seeds = forest.grow_forest(
            X, y_idx, n_classes, n_trees=hp.rfc_n_trees, mtry=mtry,
            bootstrap=hp.rfc_bootstrap, seed=seed,
            max_depth=hp.cart_max_depth,
            min_samples_split=hp.cart_min_samples_split,
        )
        payload = {"trees": trees, "tree_seeds": seeds,
                   "features_per_split": mtry, "bootstrap": hp.rfc_bootstrap}
    elif kind is ModelKind.ADB:
        stumps, alphas, errors = boost.fit_samme(X, y_idx, n_classes, hp.adb_n_rounds)
        payload = {"stumps": stumps, "alphas": alphas}
        train_meta["round_errors"] = errors
    elif kind is ModelKind.SVM:
        classes, weights, bias = svm.svm_fit_ovr(
            X, y_int, hp.svm_regularization, hp.svm_epochs, seed,
        )
        assert np.array_equal(classes, class_set)
        payload = {"weights": weights, "bias": bias}
    else:  # pragma: no cover
        raise InputError(f"unknown model kind: {kind}")

    return TrainedModel(
        kind=kind,
        class_set=class_set,
        feature_columns=feature_names,
        hyperparams=hp,
        payload=payload,
        train_meta=train_meta,
    )


def predict(model: TrainedModel, X) -> np.ndarray:
    """One raw class code per row of X; always a member of model.class_set."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ModelError("feature matrix must be 2-D")
    if X.shape[1] != len(model.feature_columns):
        raise ModelError(
            f"width mismatch: model expects {len(model.feature_columns)} features, "
            f"got {X.shape[1]}"
        )
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    kind = model.kind
    payload = model.payload
    n_classes = int(model.class_set.size)
    if kind is ModelKind.LDA:
        scores = lda.lda_scores(X, payload["means"], payload["priors"],
                                payload["covariance_cholesky"])
        winner = np.argmax(scores, axis=1)
    elif kind is ModelKind.KNN:
        winner = knn._vote_idx(payload["train_x"], payload["train_y_idx"],
                               n_classes, X, model.hyperparams.knn_k)
    elif kind is ModelKind.CART:
        winner = payload["tree"].predict_idx(X)
    elif kind is ModelKind.RFC:
        winner = forest.forest_vote_idx(payload["trees"], X, n_classes)
    elif kind is ModelKind.ADB:
        scores = boost.ensemble_scores_idx(payload["stumps"], payload["alphas"],
                                           X, n_classes)
        winner = np.argmax(scores, axis=1)
    elif kind is ModelKind.SVM:
        scores = svm.svm_scores(X, payload["weights"], payload["bias"])
        winner = np.argmax(scores, axis=1)
    else:  # pragma: no cover
        raise InputError(f"unknown model kind: {kind}")
    return model.class_set[winner]


def _payload_doc(kind: ModelKind, payload: dict, class_set: np.ndarray) -> dict:
    if kind is ModelKind.LDA:
        return {
            "means": payload["means"].tolist(),
            "priors": payload["priors"].tolist(),
            "covariance_cholesky": payload["covariance_cholesky"].tolist(),
            "epsilon": float(payload["epsilon"]),
        }
    if kind is ModelKind.KNN:
        return {
            "train_x": payload["train_x"].tolist(),
            "train_y": class_set[payload["train_y_idx"]].tolist(),
        }
    if kind is ModelKind.CART:
        return {"tree": tree.tree_to_doc(payload["tree"], class_set)}
    if kind is ModelKind.RFC:
        return {
            "trees": [tree.tree_to_doc(t, class_set) for t in payload["trees"]],
            "tree_seeds": [int(s) for s in payload["tree_seeds"]],
            "features_per_split": int(payload["features_per_split"]),
            "bootstrap": bool(payload["bootstrap"]),
        }
    if kind is ModelKind.ADB:
        return {
            "stumps": [
                {
                    "column": s.column,
                    "threshold": s.threshold,
                    "left_label": int(class_set[s.left_class]),
                    "right_label": int(class_set[s.right_class]),
                }
                for s in payload["stumps"]
            ],
            "alphas": [float(a) for a in payload["alphas"]],
        }
    if kind is ModelKind.SVM:
        return {"weights": payload["weights"].tolist(), "bias": payload["bias"].tolist()}
    raise InputError(f"unknown model kind: {kind}")  # pragma: no cover


def _payload_from_doc(kind: ModelKind, doc: dict, class_set: np.ndarray) -> dict:
    if kind is ModelKind.LDA:
        return {
            "means": np.asarray(doc["means"], dtype=np.float64),
            "priors": np.asarray(doc["priors"], dtype=np.float64),
            "covariance_cholesky": np.asarray(doc["covariance_cholesky"], dtype=np.float64),
            "epsilon": float(doc["epsilon"]),
        }
    if kind is ModelKind.KNN:
        train_y = np.asarray(doc["train_y"], dtype=np.int64)
        return {
            "train_x": np.ascontiguousarray(doc["train_x"], dtype=np.float64),
            "train_y_idx": np.searchsorted(class_set, train_y).astype(np.int64),
        }
    if kind is ModelKind.CART:
        return {"tree": tree.tree_from_doc(doc["tree"], class_set)}
    if kind is ModelKind.RFC:
        return {
            "trees": [tree.tree_from_doc(t, class_set) for t in doc["trees"]],
            "tree_seeds": np.asarray(doc["tree_seeds"], dtype=np.uint32),
            "features_per_split": int(doc["features_per_split"]),
            "bootstrap": bool(doc["bootstrap"]),
        }
    if kind is ModelKind.ADB:
        stumps = [
            boost.Stump(
                column=int(s["column"]),
                threshold=float(s["threshold"]),
                left_class=int(np.searchsorted(class_set, s["left_label"])),
                right_class=int(np.searchsorted(class_set, s["right_label"])),
            )
            for s in doc["stumps"]
        ]
        return {"stumps": stumps, "alphas": [float(a) for a in doc["alphas"]]}
    if kind is ModelKind.SVM:
        return {
            "weights": np.asarray(doc["weights"], dtype=np.float64),
            "bias": np.asarray(doc["bias"], dtype=np.float64),
        }
    raise InputError(f"unknown model kind: {kind}")  # pragma: no cover


def save_snapshot(model: TrainedModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.to_json() + "\n", encoding="utf-8")
    return path


def load_snapshot(path: str | Path) -> TrainedModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"unreadable snapshot {path}: {exc}") from exc
    return model_from_doc(doc, source=str(path))


def model_from_doc(doc: dict, source: str = "<doc>") -> TrainedModel:
    if not isinstance(doc, dict) or doc.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise SnapshotError(
            f"{source}: unsupported snapshot format_version "
            f"{doc.get('format_version') if isinstance(doc, dict) else doc!r}"
        )
    try:
        kind = ModelKind(doc["kind"])
        class_set = np.asarray(doc["class_set"], dtype=np.int64)
        hp = Hyperparams(**doc["hyperparams"])
        payload = _payload_from_doc(kind, doc["payload"], class_set)
        return TrainedModel(
            kind=kind,
            class_set=class_set,
            feature_columns=tuple(doc["feature_columns"]),
            hyperparams=hp,
            payload=payload,
            train_meta=dict(doc["train_meta"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"{source}: malformed snapshot: {exc}") from exc
