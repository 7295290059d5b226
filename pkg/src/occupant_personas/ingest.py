"""Acquire, parse, clean, and split residential energy-survey microdata.

The raw survey file is a CSV of coded answers: blanks mark missing values,
a handful of cells carry textual infinity markers, and everything else is
numeric. Cleaning substitutes sentinels for the former two so that every
downstream stage sees a fully finite numeric matrix. Respondent age is
collapsed into five ordinal age groups during cleaning.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from urllib.parse import urlparse

import numpy as np
import requests

from .errors import (
    DataFormatError,
    HttpError,
    InputError,
    NetworkError,
    StorageError,
)

MISSING_SENTINEL = -1
INFINITY_SENTINEL = 2147483647  # fixed 32-bit max keeps files portable, comparisons exact

# "none" is deliberately absent: real survey columns use NONE as a category
DEFAULT_MISSING_MARKERS = frozenset({"", "na", "n/a", "nan", "null", "."})
DEFAULT_INFINITY_MARKERS = frozenset({"inf", "+inf", "-inf", "infinity"})

AGE_COLUMN = "HHAGE"


class AgeGroup(IntEnum):
    """Five ordinal respondent age groups, ascending by age range."""

    CHILDREN = 0
    YOUNG_ADULT = 1
    MIDDLE_ADULT = 2
    SENIOR_ADULT = 3
    SENIOR = 4


# (lower, upper, group); both endpoints inclusive, lower bin owns the boundary
DEFAULT_AGE_BINS: tuple[tuple[int, int, AgeGroup], ...] = (
    (0, 12, AgeGroup.CHILDREN),
    (13, 30, AgeGroup.YOUNG_ADULT),
    (31, 50, AgeGroup.MIDDLE_ADULT),
    (51, 70, AgeGroup.SENIOR_ADULT),
    (71, 110, AgeGroup.SENIOR),
)

AGE_GROUP_NAMES = {
    AgeGroup.CHILDREN: "Child (0-12)",
    AgeGroup.YOUNG_ADULT: "Young adult (13-30)",
    AgeGroup.MIDDLE_ADULT: "Middle-aged adult (31-50)",
    AgeGroup.SENIOR_ADULT: "Senior adult (51-70)",
    AgeGroup.SENIOR: "Senior (71-110)",
}


@dataclass(frozen=True)
class RawTable:
    """Parsed but uncleaned survey table: header plus rows of string cells."""

    column_names: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.column_names:
            raise DataFormatError("table has no columns")
        if any(not c for c in self.column_names):
            raise DataFormatError("empty column name in header")
        if len(set(self.column_names)) != len(self.column_names):
            dupes = sorted({c for c in self.column_names if self.column_names.count(c) > 1})
            raise DataFormatError(f"duplicate column names: {dupes}")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.column_names):
                raise DataFormatError(
                    f"row {i} has {len(row)} cells, expected {len(self.column_names)}"
                )

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.column_names)


@dataclass(frozen=True)
class CodebookEntry:
    category: str  # one of the 12 survey section letters A-L, or "unknown"
    description: str
    value_labels: dict[int, str] = field(default_factory=dict)
    kind: str = "categorical-coded"  # or "numeric"


class Codebook:
    """Attribute metadata keyed by column code; unknown columns are flagged."""

    CATEGORIES = tuple("ABCDEFGHIJKL")
    UNKNOWN = CodebookEntry(category="unknown", description="not in codebook")

    def __init__(self, entries: dict[str, CodebookEntry]):
        for code, entry in entries.items():
            if entry.category not in self.CATEGORIES:
                raise InputError(f"codebook entry {code}: bad category {entry.category!r}")
        self.entries = dict(entries)

    def lookup(self, code: str) -> CodebookEntry:
        return self.entries.get(code, self.UNKNOWN)

    def category_of(self, code: str) -> str:
        return self.lookup(code).category

    @classmethod
    def from_json(cls, path: str | Path) -> "Codebook":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read codebook {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"codebook {path} is not valid JSON: {exc}") from exc
        entries = {}
        for code, raw in doc["attributes"].items():
            entries[code] = CodebookEntry(
                category=raw["category"],
                description=raw.get("description", ""),
                value_labels={int(k): v for k, v in raw.get("value_labels", {}).items()},
                kind=raw.get("kind", "categorical-coded"),
            )
        return cls(entries)


@dataclass(frozen=True)
class CleaningRules:
    """Sentinel substitution and age-binning configuration."""

    missing_sentinel: int = MISSING_SENTINEL
    infinity_sentinel: int = INFINITY_SENTINEL
    age_bins: tuple[tuple[int, int, AgeGroup], ...] = DEFAULT_AGE_BINS
    age_column: str = AGE_COLUMN
    missing_markers: frozenset[str] = DEFAULT_MISSING_MARKERS
    infinity_markers: frozenset[str] = DEFAULT_INFINITY_MARKERS

    def __post_init__(self):
        bins = sorted(self.age_bins)
        if bins[0][0] != 0 or bins[-1][1] != 110:
            raise InputError("age bins must cover 0-110")
        for (lo_a, hi_a, _), (lo_b, _, _) in zip(bins, bins[1:]):
            if lo_b != hi_a + 1:
                raise InputError(f"age bins not contiguous at {hi_a}/{lo_b}")

    def digest(self) -> str:
        doc = {
            "missing_sentinel": self.missing_sentinel,
            "infinity_sentinel": self.infinity_sentinel,
            "age_bins": [[lo, hi, int(g)] for lo, hi, g in self.age_bins],
            "age_column": self.age_column,
            "missing_markers": sorted(self.missing_markers),
            "infinity_markers": sorted(self.infinity_markers),
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class Dataset:
    """Immutable cleaned numeric table: column codes plus a finite float matrix."""

    def __init__(self, columns, matrix, provenance=None):
        self.columns: tuple[str, ...] = tuple(columns)
        matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise InputError("dataset matrix must be 2-D")
        if matrix.shape[1] != len(self.columns):
            raise InputError(
                f"matrix has {matrix.shape[1]} columns, header has {len(self.columns)}"
            )
        if matrix.size and not np.isfinite(matrix).all():
            raise DataFormatError("dataset contains non-finite cells")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.provenance: dict = dict(provenance or {})

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    def column_index(self, code: str) -> int:
        try:
            return self.columns.index(code)
        except ValueError:
            raise DataFormatError(f"column {code!r} not in dataset") from None

    def column(self, code: str) -> np.ndarray:
        return self.matrix[:, self.column_index(code)]

    def select_columns(self, codes) -> "Dataset":
        idx = [self.column_index(c) for c in codes]
        return Dataset(codes, self.matrix[:, idx], self.provenance)

    def select_rows(self, row_idx) -> "Dataset":
        row_idx = np.asarray(row_idx, dtype=np.intp)
        provenance = dict(self.provenance)
        if "age_raw" in provenance:  # row-aligned metadata follows the subset
            ages = provenance["age_raw"]
            provenance["age_raw"] = [ages[i] for i in row_idx]
        return Dataset(self.columns, self.matrix[row_idx], provenance)

    def save_csv(self, path: str | Path) -> None:
        """Persist as CSV with identical header order; floats round-trip exactly."""
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.matrix:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        meta = path.with_suffix(path.suffix + ".meta.json")
        meta.write_text(
            json.dumps({"format_version": 1, "provenance": self.provenance}, sort_keys=True, indent=2)
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load_csv(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        if not path.exists():
            raise DataFormatError(f"no such dataset file: {path}")
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataFormatError(f"{path}: empty file") from None
            rows = []
            for i, row in enumerate(reader):
                if len(row) != len(header):
                    raise DataFormatError(
                        f"{path}: row {i} has {len(row)} cells, expected {len(header)}"
                    )
                try:
                    rows.append([float(c) for c in row])
                except ValueError as exc:
                    raise DataFormatError(f"{path}: row {i}: {exc}") from None
        provenance = {}
        meta = path.with_suffix(path.suffix + ".meta.json")
        if meta.exists():
            provenance = json.loads(meta.read_text(encoding="utf-8")).get("provenance", {})
        matrix = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(header)))
        return cls(header, matrix, provenance)


def fetch_recs(url: str, dest: str | Path, overwrite: bool = False) -> Path:
    """Download the survey CSV to dest; reuse an existing file unless overwrite."""
    parsed = urlparse(url)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        raise InputError(f"not a fetchable URL: {url!r}")
    dest = Path(dest)
    if dest.exists() and not overwrite:
        return dest
    try:
        resp = requests.get(url, stream=True, timeout=120)
    except requests.RequestException as exc:
        raise NetworkError(f"could not reach {url}: {exc}") from exc
    if resp.status_code != 200:
        raise HttpError(resp.status_code, url)
    tmp = dest.with_suffix(dest.suffix + ".part")
    try:
        dest.parent.mkdir(parents=True, exist_ok=True)
        with tmp.open("wb") as fh:
            for chunk in resp.iter_content(chunk_size=1 << 20):
                fh.write(chunk)
        tmp.replace(dest)
    except OSError as exc:
        try:
            tmp.unlink(missing_ok=True)
        except OSError:
            pass
        raise StorageError(f"could not write {dest}: {exc}") from exc
    return dest


def load_table(path: str | Path) -> RawTable:
    """Parse a header-first CSV into a RawTable, length-checking every row."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    with path.open("r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, expected a header line") from None
        rows = []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: ragged row {i} has {len(row)} cells, expected {len(header)}"
                )
            rows.append(tuple(row))
    return RawTable(tuple(header), tuple(rows))


def bin_age(years, bins=DEFAULT_AGE_BINS) -> AgeGroup:
    """Map an age in whole years to its ordinal AgeGroup."""
    if isinstance(years, float) and not years.is_integer():
        raise InputError(f"age must be a whole number of years, got {years}")
    years = int(years)
    if not 0 <= years <= 110:
        raise InputError(f"age out of range 0-110: {years}")
    for lo, hi, group in bins:
        if lo <= years <= hi:
            return group
    raise InputError(f"age {years} not covered by bins")  # unreachable with valid bins


def encode_text_columns(raw: RawTable, rules: CleaningRules | None = None):
    """Deterministically integer-code columns whose values are all textual.

    Public survey files carry a few classification columns coded as strings
    (metro status, urban type, climate region). A column qualifies only when
    none of its non-marker cells parses as a number; sorted distinct values
    map to 1-based codes. Returns (table, {column: {text: code}}); mixed
    columns are left alone so stray typos still fail in clean().
    """
    rules = rules or CleaningRules()
    markers = rules.missing_markers | rules.infinity_markers

    def is_marker(cell: str) -> bool:
        return cell.strip().lower() in markers

    def is_numeric(cell: str) -> bool:
        try:
            float(cell.strip())
            return True
        except ValueError:
            return False

    encodings: dict[str, dict[str, int]] = {}
    for j, name in enumerate(raw.column_names):
        values = [row[j] for row in raw.rows if not is_marker(row[j])]
        if not values or any(is_numeric(v) for v in values):
            continue
        codes = {text: i + 1 for i, text in enumerate(sorted({v.strip() for v in values}))}
        encodings[name] = codes
    if not encodings:
        return raw, {}
    indices = {raw.column_names.index(name): codes for name, codes in encodings.items()}
    rows = []
    for row in raw.rows:
        cells = list(row)
        for j, codes in indices.items():
            if not is_marker(cells[j]):
                cells[j] = str(codes[cells[j].strip()])
        rows.append(tuple(cells))
    return RawTable(raw.column_names, tuple(rows)), encodings


def _parse_cell(cell: str, rules: CleaningRules) -> float:
    text = cell.strip()
    lowered = text.lower()
    if lowered in rules.missing_markers:
        return float(rules.missing_sentinel)
    if lowered in rules.infinity_markers:
        return float(rules.infinity_sentinel)
    value = float(text)  # ValueError propagates to caller for (row, col) context
    if math.isnan(value):
        return float(rules.missing_sentinel)
    if math.isinf(value):
        return float(rules.infinity_sentinel)
    return value


def clean(raw: RawTable, rules: CleaningRules | None = None, source: str = "") -> Dataset:
    """Substitute sentinels, parse numerics, and bin the respondent-age column."""
    rules = rules or CleaningRules()
    n, d = raw.n_rows, raw.n_cols
    matrix = np.empty((n, d), dtype=np.float64)
    for i, row in enumerate(raw.rows):
        for j, cell in enumerate(row):
            try:
                matrix[i, j] = _parse_cell(cell, rules)
            except ValueError:
                raise DataFormatError(
                    f"unparseable cell at row {i}, column {raw.column_names[j]!r}: {cell!r}"
                ) from None
    provenance = {"source": source, "rules_digest": rules.digest()}
    if rules.age_column in raw.column_names:
        j = raw.column_names.index(rules.age_column)
        ages = matrix[:, j].copy()
        provenance["age_raw"] = [float(a) for a in ages]
        for i, a in enumerate(ages):
            if a == rules.missing_sentinel:
                continue
            try:
                matrix[i, j] = float(int(bin_age(a, rules.age_bins)))
            except InputError as exc:
                raise DataFormatError(
                    f"bad age at row {i}, column {rules.age_column!r}: {exc}"
                ) from None
    return Dataset(raw.column_names, matrix, provenance)


def split(data: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Disjoint random row partition; |train| = floor(train_fraction * n)."""
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = data.n_rows
    if n < 2:
        raise InputError(f"need at least 2 rows to split, got {n}")
    # epsilon guards fp products like 0.7*10 = 6.999... from under-flooring
    n_train = int(math.floor(train_fraction * n + 1e-9))
    if n_train == 0 or n_train == n:
        raise InputError(
            f"degenerate split: fraction {train_fraction} on {n} rows leaves an empty side"
        )
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return data.select_rows(train_idx), data.select_rows(test_idx)
