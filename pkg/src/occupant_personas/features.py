"""Feature selection, target separation, and correlation reports.

Drop rules are declarative data (a versioned JSON file ships with the repo)
so the survey's discarded-column set stays auditable. The sixteen occupant-
characteristic targets are described by a TargetSpec built from the shipped
codebook data.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InputError, UndefinedStatisticError
from .ingest import Dataset

TARGET_CODES = (
    "EQUIPMUSE",
    "TEMPHOME",
    "TEMPGONE",
    "TEMPNITE",
    "USEWWAC",
    "TEMPHOMEAC",
    "TEMPGONEAC",
    "TEMPNITEAC",
    "HHAGE",
    "EMPLOYHH",
    "EDUCATION",
    "NHSLDMEM",
    "NUMADULT",
    "NUMCHILD",
    "ATHOME",
    "MONEYPY",
)

PATTERN_CLASSES = ("imputation-flags", "replicate-weights", "dollar-amounts", "phone-count")


def _read_json(path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{what} {path} is not valid JSON: {exc}") from exc


# Column-name conventions of the public survey file for each named rule class.
_DOLLAR_PREFIXES = ("DOLLAR", "DOLEL", "DOLNG", "DOLLP", "DOLFO", "TOTALDOL")
_PHONE_COLUMNS = frozenset({"NUMSMPHONE", "NUMPHONE"})


@dataclass(frozen=True)
class DropRule:
    kind: str  # "prefix" | "exact" | "pattern-class"
    value: str

    def __post_init__(self):
        if self.kind not in ("prefix", "exact", "pattern-class"):
            raise InputError(f"unknown drop-rule kind: {self.kind!r}")
        if self.kind == "pattern-class" and self.value not in PATTERN_CLASSES:
            raise InputError(f"unknown pattern class: {self.value!r}")

    def matches(self, column: str) -> bool:
        if self.kind == "prefix":
            return column.startswith(self.value)
        if self.kind == "exact":
            return column == self.value
        if self.value == "imputation-flags":
            return column.startswith("Z")
        if self.value == "replicate-weights":
            return column.startswith("BRRWT")
        if self.value == "dollar-amounts":
            return column.startswith(_DOLLAR_PREFIXES)
        return column in _PHONE_COLUMNS  # phone-count


@dataclass(frozen=True)
class DropRules:
    """Order-independent set of column-drop rules; applying twice equals once."""

    rules: tuple[DropRule, ...]

    def matches(self, column: str) -> bool:
        return any(rule.matches(column) for rule in self.rules)

    @classmethod
    def from_json(cls, path: str | Path) -> "DropRules":
        doc = _read_json(path, "drop-rules file")
        if doc.get("format_version") != 1:
            raise DataFormatError(f"{path}: unsupported drop-rules format_version")
        return cls(tuple(DropRule(r["kind"], r["value"]) for r in doc["rules"]))


@dataclass(frozen=True)
class TargetDomain:
    """Value domain of one target: an enumerated code set or an integer range.

    Special codes (e.g. the survey's "not applicable") are enumerated alongside
    a range so that every observable value decodes.
    """

    kind: str  # "enum" | "range"
    codes: tuple[int, ...] = ()
    lo: int = 0
    hi: int = 0
    specials: tuple[int, ...] = ()

    def contains(self, value) -> bool:
        v = float(value)
        if not v.is_integer():
            return False
        v = int(v)
        if v in self.specials:
            return True
        if self.kind == "enum":
            return v in self.codes
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class TargetSpec:
    """The sixteen target-variable definitions: code, domain, decode map."""

    entries: dict[str, TargetDomain] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.entries) != set(TARGET_CODES):
            missing = set(TARGET_CODES) - set(self.entries)
            extra = set(self.entries) - set(TARGET_CODES)
            raise InputError(
                f"target spec must define exactly the 16 targets; missing={sorted(missing)} extra={sorted(extra)}"
            )
        object.__setattr__(self, "entries", {c: self.entries[c] for c in TARGET_CODES})

    @property
    def codes(self) -> tuple[str, ...]:
        return TARGET_CODES

    def domain(self, code: str) -> TargetDomain:
        if code not in self.entries:
            raise InputError(f"not a target: {code!r}")
        return self.entries[code]

    @classmethod
    def from_json(cls, path: str | Path) -> "TargetSpec":
        doc = _read_json(path, "codebook")
        entries = {}
        for code in TARGET_CODES:
            raw = doc["targets"][code]
            entries[code] = TargetDomain(
                kind=raw["kind"],
                codes=tuple(raw.get("codes", ())),
                lo=raw.get("lo", 0),
                hi=raw.get("hi", 0),
                specials=tuple(raw.get("specials", ())),
            )
        return cls(entries)


@dataclass(frozen=True)
class CorrelationReport:
    """Ranked correlates of one target plus the (k+1)x(k+1) correlation matrix."""

    target: str
    ranked: tuple[tuple[str, float], ...]
    matrix: np.ndarray  # rows/cols ordered [target, *ranked codes]

    @property
    def member_codes(self) -> tuple[str, ...]:
        return (self.target,) + tuple(code for code, _ in self.ranked)


def apply_drop_rules(data: Dataset, rules: DropRules) -> Dataset:
    """Drop every column matched by any rule; column order is preserved."""
    for rule in rules.rules:
        if rule.kind == "exact" and rule.value not in data.columns:
            warnings.warn(f"drop rule names absent column {rule.value!r}", stacklevel=2)
    keep = [c for c in data.columns if not rules.matches(c)]
    if len(keep) == len(data.columns):
        return data
    return data.select_columns(keep)


def separate(data: Dataset, spec: TargetSpec) -> tuple[Dataset, Dataset]:
    """Split a dataset into descriptive features and the 16 target columns."""
    missing = [c for c in spec.codes if c not in data.columns]
    if missing:
        raise DataFormatError(f"dataset lacks target column(s): {missing}")
    feature_cols = [c for c in data.columns if c not in spec.codes]
    if not feature_cols:
        raise DataFormatError("no descriptive variables left after removing targets")
    return data.select_columns(feature_cols), data.select_columns(list(spec.codes))


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equal-length numeric vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("pearson needs two 1-D vectors of equal length")
    if x.size < 2:
        raise InputError("pearson needs at least 2 observations")
    xc = x - x.mean()
    yc = y - y.mean()
    ssx = float(np.dot(xc, xc))
    ssy = float(np.dot(yc, yc))
    if ssx == 0.0 or ssy == 0.0:
        raise UndefinedStatisticError("correlation undefined: zero variance input")
    # sqrt of the product keeps self-correlation at exactly 1.0
    r = float(np.dot(xc, yc)) / float(np.sqrt(ssx * ssy))
    return max(-1.0, min(1.0, r))


def top_correlates(data: Dataset, target: str, k: int = 10) -> CorrelationReport:
    """Rank the k columns most correlated (by |r|) with the target column.

    Ties in |r| break by ascending column code. Zero-variance columns cannot
    be ranked and are skipped; if nothing is rankable the statistic is
    undefined.
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if k >= data.n_cols:
        raise InputError(f"k={k} must be smaller than the column count {data.n_cols}")
    t = data.column(target)
    scored: list[tuple[str, float]] = []
    for code in data.columns:
        if code == target:
            continue
        try:
            scored.append((code, pearson(t, data.column(code))))
        except UndefinedStatisticError:
            continue
    if not scored:
        raise UndefinedStatisticError(
            f"no rankable columns for {target}: all correlations undefined"
        )
    scored.sort(key=lambda item: (-abs(item[1]), item[0]))
    ranked = tuple(scored[:k])
    members = [target] + [code for code, _ in ranked]
    m = len(members)
    matrix = np.ones((m, m), dtype=np.float64)
    cols = [data.column(c) for c in members]
    for i in range(m):
        for j in range(i + 1, m):
            r = pearson(cols[i], cols[j])
            matrix[i, j] = r
            matrix[j, i] = r
    return CorrelationReport(target=target, ranked=ranked, matrix=matrix)
