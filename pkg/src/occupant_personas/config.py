"""Run configuration: defaults, config-file loading, and flag precedence.

Precedence is flags > config file > built-in defaults. The seed is always
materialized so every run is reproducible by construction.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .errors import InputError
from .features import TARGET_CODES
from .learners import MODEL_ORDER, Hyperparams

DEFAULT_SEED = 2015
DEFAULT_FETCH_URL = (
    "https://www.eia.gov/consumption/residential/data/2015/csv/recs2015_public_v4.csv"
)
CACHE_ENV_VAR = "OCCUPANT_PERSONAS_CACHE"
MODEL_NAMES = tuple(m.value for m in MODEL_ORDER)


def packaged_data(name: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(resources.files("occupant_personas").joinpath("data", name))


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "occupant_personas"


@dataclass
class RunConfig:
    data_path: Path | None = None          # raw survey CSV (fetch dest / prepare input)
    fetch_url: str = DEFAULT_FETCH_URL
    drop_rules_path: Path = field(default_factory=lambda: packaged_data("drop_rules.json"))
    codebook_path: Path = field(default_factory=lambda: packaged_data("codebook.json"))
    label_map_path: Path = field(default_factory=lambda: packaged_data("label_map.json"))
    targets: tuple[str, ...] = TARGET_CODES
    models: tuple[str, ...] = MODEL_NAMES
    seed: int = DEFAULT_SEED
    train_fraction: float = 0.8
    k_folds: int = 10
    out_dir: Path = Path("out")
    workers: int = 1
    stratified_folds: bool = False
    overwrite: bool = False
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    def __post_init__(self):
        bad_targets = [t for t in self.targets if t not in TARGET_CODES]
        if bad_targets:
            raise InputError(f"unknown target(s): {bad_targets}; expected {list(TARGET_CODES)}")
        bad_models = [m for m in self.models if m not in MODEL_NAMES]
        if bad_models:
            raise InputError(f"unknown model(s): {bad_models}; expected {list(MODEL_NAMES)}")
        if not 0.0 < self.train_fraction < 1.0:
            raise InputError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.k_folds < 2:
            raise InputError(f"k_folds must be >= 2, got {self.k_folds}")
        if self.workers < 1:
            raise InputError(f"workers must be >= 1, got {self.workers}")

    @property
    def prepared_path(self) -> Path:
        return self.out_dir / "prepared.csv"

    @property
    def snapshots_dir(self) -> Path:
        return self.out_dir / "snapshots"

    def digest(self, dataset_sha: str = "") -> str:
        """Fingerprint of everything that shapes trained snapshots."""
        doc = {
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "k_folds": self.k_folds,
            "stratified_folds": self.stratified_folds,
            "hyperparams": self.hyperparams.digest(),
            "dataset": dataset_sha,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


_PATH_KEYS = {"data_path", "drop_rules_path", "codebook_path", "label_map_path", "out_dir"}
_LIST_KEYS = {"targets", "models"}


def load_config(config_path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, an optional JSON config file, and CLI overrides."""
    merged: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise InputError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    if "hyperparams" in merged and isinstance(merged["hyperparams"], dict):
        try:
            merged["hyperparams"] = Hyperparams(**merged["hyperparams"])
        except TypeError as exc:
            raise InputError(f"bad hyperparams in config: {exc}") from exc
    for key in _PATH_KEYS & set(merged):
        merged[key] = Path(merged[key])
    for key in _LIST_KEYS & set(merged):
        merged[key] = tuple(merged[key])
    return RunConfig(**merged)


def file_sha256(path: str | Path, limit: int | None = None) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            h.update(chunk)
    digest = h.hexdigest()
    return digest[:limit] if limit else digest
