"""Decode predicted target codes into readable characteristics and persona cards.

The narrative is template-based: deterministic slot filling from decoded
labels, so identical prediction vectors produce identical prose. Names come
from a fixed placeholder list and every card is flagged as fictional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import DataFormatError, InputError
from .features import TARGET_CODES

CARD_FORMAT_VERSION = 1

PLACEHOLDER_NAMES = (
    "Avery", "Blair", "Casey", "Devon", "Emery",
    "Finley", "Harper", "Jordan", "Marlow", "Rowan",
)

CHARACTERISTIC_GROUPS = (
    ("household_composition", ("NHSLDMEM", "NUMADULT", "NUMCHILD", "ATHOME")),
    ("thermal_preferences", ("TEMPHOME", "TEMPGONE", "TEMPNITE",
                             "TEMPHOMEAC", "TEMPGONEAC", "TEMPNITEAC")),
    ("equipment_behavior", ("EQUIPMUSE", "USEWWAC")),
    ("demographics", ("HHAGE", "EMPLOYHH", "EDUCATION")),
    ("economics", ("MONEYPY",)),
)

WINTER_TEMP_TARGETS = ("TEMPHOME", "TEMPGONE", "TEMPNITE")
SUMMER_TEMP_TARGETS = ("TEMPHOMEAC", "TEMPGONEAC", "TEMPNITEAC")


@dataclass(frozen=True)
class LabelEntry:
    """Decode rule for one target: enumerated labels and/or a numeric range."""

    kind: str  # "enum" | "temperature" | "count"
    labels: dict[int, str] = field(default_factory=dict)
    lo: int = 0
    hi: int = 0
    singular: str = ""
    plural: str = ""


class LabelMap:
    """Per-target map from class code to display label."""

    def __init__(self, entries: dict[str, LabelEntry]):
        missing = set(TARGET_CODES) - set(entries)
        if missing:
            raise InputError(f"label map lacks targets: {sorted(missing)}")
        self.entries = entries

    @classmethod
    def from_json(cls, path: str | Path) -> "LabelMap":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read label map {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"label map {path} is not valid JSON: {exc}") from exc
        if doc.get("format_version") != 1:
            raise DataFormatError(f"{path}: unsupported label-map format_version")
        entries = {}
        for code, raw in doc["targets"].items():
            entries[code] = LabelEntry(
                kind=raw["kind"],
                labels={int(k): v for k, v in raw.get("labels", {}).items()},
                lo=raw.get("lo", 0),
                hi=raw.get("hi", 0),
                singular=raw.get("singular", ""),
                plural=raw.get("plural", ""),
            )
        return cls(entries)


def decode(target: str, value, labels: LabelMap) -> str:
    """Turn one predicted class code into its display label."""
    if target not in TARGET_CODES:
        raise InputError(f"unknown target: {target!r}")
    entry = labels.entries[target]
    v = float(value)
    if not v.is_integer():
        raise InputError(f"{target}: code must be an integer, got {value!r}")
    v = int(v)
    if v in entry.labels:
        return entry.labels[v]
    if entry.kind == "temperature" and entry.lo <= v <= entry.hi:
        return f"{v} °F"
    if entry.kind == "count" and entry.lo <= v <= entry.hi:
        noun = entry.singular if v == 1 else entry.plural
        return f"{v} {noun}"
    raise InputError(f"{target}: code {v} outside the declared value domain")


@dataclass(frozen=True)
class PredictionVector:
    """Predicted class code per target plus per-target model provenance."""

    values: dict[str, int]
    provenance: dict[str, dict] = field(default_factory=dict)

    def missing_targets(self) -> list[str]:
        return [t for t in TARGET_CODES if t not in self.values]


@dataclass
class PersonaCard:
    """Structured persona: 16 decoded characteristics plus a rendered narrative."""

    name: str
    characteristics: dict[str, list[tuple[str, str]]]
    narrative: str
    generated_at: str
    source: dict = field(default_factory=dict)
    annotations: dict = field(default_factory=dict)

    def labels(self) -> dict[str, str]:
        return {t: label for group in self.characteristics.values() for t, label in group}

    def to_doc(self) -> dict:
        return {
            "format_version": CARD_FORMAT_VERSION,
            "name": self.name,
            "fictional": True,
            "characteristics": {
                group: [[t, label] for t, label in pairs]
                for group, pairs in self.characteristics.items()
            },
            "narrative": self.narrative,
            "generated_at": self.generated_at,
            "source": self.source,
            "annotations": self.annotations,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "PersonaCard":
        if doc.get("format_version") != CARD_FORMAT_VERSION:
            raise DataFormatError(
                f"unsupported persona card format_version {doc.get('format_version')!r}"
            )
        return cls(
            name=doc["name"],
            characteristics={
                group: [(t, label) for t, label in pairs]
                for group, pairs in doc["characteristics"].items()
            },
            narrative=doc["narrative"],
            generated_at=doc["generated_at"],
            source=dict(doc.get("source", {})),
            annotations=dict(doc.get("annotations", {})),
        )

    def content_equal(self, other: "PersonaCard") -> bool:
        """Equality ignoring the generation timestamp."""
        a, b = self.to_doc(), other.to_doc()
        a.pop("generated_at")
        b.pop("generated_at")
        return a == b


def _numeric_temps(pred: PredictionVector, labels: LabelMap, targets) -> list[int]:
    out = []
    for t in targets:
        entry = labels.entries[t]
        v = int(pred.values[t])
        if entry.lo <= v <= entry.hi and v not in entry.labels:
            out.append(v)
    return out


def _temp_phrase(temps: list[int], season: str) -> str:
    if not temps:
        return f" No usable {season} thermostat setting was predicted."
    lo, hi = min(temps), max(temps)
    if lo == hi:
        return f" They keep the home at {lo} °F in {season}."
    return f" They keep the home between {lo} °F and {hi} °F in {season}."


def build_narrative(name: str, decoded: dict[str, str],
                    pred: PredictionVector, labels: LabelMap) -> str:
    winter = _temp_phrase(_numeric_temps(pred, labels, WINTER_TEMP_TARGETS), "winter")
    summer = _temp_phrase(_numeric_temps(pred, labels, SUMMER_TEMP_TARGETS), "summer")
    sentences = [
        f"{name} is a fictional occupant persona assembled from model predictions.",
        f"{name} is in the {decoded['HHAGE'].lower()} age group, "
        f"is {decoded['EMPLOYHH']}, and has completed {decoded['EDUCATION']}.",
        f"The household counts {decoded['NHSLDMEM']} "
        f"({decoded['NUMADULT']}, {decoded['NUMCHILD']}), "
        f"and someone is at home on {decoded['ATHOME']}.",
        f"With the main heating equipment, the household {decoded['EQUIPMUSE']}.{winter}",
        f"With the most-used room air conditioner, the household {decoded['USEWWAC']}.{summer}",
        f"Annual household income: {decoded['MONEYPY']}.",
    ]
    return " ".join(sentences)


def build_persona(pred: PredictionVector, labels: LabelMap, name_seed: int = 0,
                  timestamp: str | None = None, annotations: dict | None = None) -> PersonaCard:
    """Decode all 16 predicted characteristics and fill the narrative template."""
    missing = pred.missing_targets()
    if missing:
        raise InputError(f"prediction vector incomplete, missing: {missing}")
    decoded = {t: decode(t, pred.values[t], labels) for t in TARGET_CODES}
    name = PLACEHOLDER_NAMES[name_seed % len(PLACEHOLDER_NAMES)]
    characteristics = {
        group: [(t, decoded[t]) for t in members]
        for group, members in CHARACTERISTIC_GROUPS
    }
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return PersonaCard(
        name=name,
        characteristics=characteristics,
        narrative=build_narrative(name, decoded, pred, labels),
        generated_at=timestamp,
        source={"predictions": {t: int(v) for t, v in pred.values.items()},
                "provenance": pred.provenance},
        annotations=dict(annotations or {}),
    )


RENDER_FORMATS = ("structured-text", "markdown", "plain")


def render(card: PersonaCard, fmt: str = "structured-text") -> str:
    """Render a card; structured-text output parses back losslessly."""
    if fmt == "structured-text":
        return json.dumps(card.to_doc(), sort_keys=True, indent=2) + "\n"
    if fmt == "markdown":
        lines = [f"# Persona: {card.name} (fictional)", "",
                 f"*generated {card.generated_at}*", "", "## Characteristics", ""]
        for group, pairs in card.characteristics.items():
            for target, label in pairs:
                lines.append(f"- {target}: {label}")
        lines += ["", "## Narrative", "", card.narrative, ""]
        if card.annotations:
            lines += ["## Notes", ""]
            lines += [f"{k}: {v}" for k, v in sorted(card.annotations.items())]
            lines.append("")
        return "\n".join(lines)
    if fmt == "plain":
        lines = [f"Persona: {card.name} (fictional)", f"Generated: {card.generated_at}", ""]
        for group, pairs in card.characteristics.items():
            lines.append(group.replace("_", " ") + ":")
            for target, label in pairs:
                lines.append(f"  {target}: {label}")
        lines += ["", card.narrative, ""]
        return "\n".join(lines)
    raise InputError(f"unsupported render format: {fmt!r} (expected one of {RENDER_FORMATS})")


def parse_card(text: str) -> PersonaCard:
    """Inverse of render(card, "structured-text")."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"not a structured-text persona card: {exc}") from exc
    return PersonaCard.from_doc(doc)
