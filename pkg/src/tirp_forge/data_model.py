"""Core value types, event-log ingestion, knowledge-base loading, and windowing.

Time is integer minutes everywhere. RFC 3339 timestamps are converted on
ingestion, relative to the dataset's earliest timestamp.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

STATE = "S"
GRADIENT = "G"

_KIND_RANK = {STATE: 0, GRADIENT: 1}

DEFAULT_STATE_LABELS = ("Low", "Normal", "High")
GRADIENT_LABELS = ("Decreasing", "Stable", "Increasing")

# Declared label orders used as the mining tie-breaker. Custom labels not
# listed here fall back to lexical order.
_LABEL_RANK = {
    "Low": 0, "Normal": 1, "High": 2,
    "Decreasing": 0, "Stable": 1, "Increasing": 2,
    "severe": 0, "moderate": 1, "mild": 2,
}

# Concept names appear inside canonical TIRP strings, so the string's
# delimiters are forbidden in them.
_FORBIDDEN_NAME_CHARS = set(".|;,")


class DataValidationError(Exception):
    """Bad input data or configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class Sample:
    entity_id: str
    concept: str
    t: int  # minutes from the dataset epoch
    value: float


@dataclass(frozen=True)
class Symbol:
    concept: str
    kind: str  # STATE or GRADIENT
    label: str

    def sort_key(self):
        # (concept lexical, State < Gradient, label in declared order)
        return (self.concept, _KIND_RANK[self.kind],
                _LABEL_RANK.get(self.label, len(_LABEL_RANK)), self.label)

    def __str__(self):
        return f"{self.concept}.{self.kind}.{self.label}"


@dataclass(frozen=True)
class SymbolicInterval:
    entity_id: str
    symbol: Symbol
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise DataValidationError(
                f"interval start {self.start} > end {self.end}")

    def sort_key(self):
        return (self.start, self.end, self.symbol.sort_key())


@dataclass(frozen=True)
class AbstractionRule:
    concept: str
    unit: str
    normal_low: float
    normal_high: float
    gradient_delta: float
    interp_max_gap: int  # minutes
    state_labels: tuple = DEFAULT_STATE_LABELS

    def __post_init__(self):
        bad = _FORBIDDEN_NAME_CHARS.intersection(self.concept)
        if bad:
            raise DataValidationError(
                f"concept {self.concept!r} contains forbidden characters {sorted(bad)}")
        if not self.normal_low < self.normal_high:
            raise DataValidationError(
                f"{self.concept}: normal_low {self.normal_low} must be < "
                f"normal_high {self.normal_high}")
        if not self.gradient_delta > 0:
            raise DataValidationError(
                f"{self.concept}: gradient_delta must be positive, got "
                f"{self.gradient_delta}")
        if not self.interp_max_gap > 0:
            raise DataValidationError(
                f"{self.concept}: interp_max_gap must be positive, got "
                f"{self.interp_max_gap}")
        if len(self.state_labels) != 3:
            raise DataValidationError(
                f"{self.concept}: state_labels must be a triple, got "
                f"{self.state_labels!r}")


@dataclass(frozen=True)
class KnowledgeBase:
    rules: dict  # concept -> AbstractionRule
    source: str | None = None

    def rule_for(self, concept):
        return self.rules.get(concept)

    def __contains__(self, concept):
        return concept in self.rules


@dataclass(frozen=True)
class Cohort:
    label: str
    entities: frozenset
    events: tuple  # all Samples of those entities

    def __post_init__(self):
        for s in self.events:
            if s.entity_id not in self.entities:
                raise DataValidationError(
                    f"sample for unknown entity {s.entity_id!r}")


@dataclass(frozen=True)
class WindowConfig:
    reference_time: dict  # entity -> t_ref
    admission_time: dict  # entity -> t_adm
    window_len: int
    lab_concepts: frozenset = frozenset()

    def __post_init__(self):
        if self.window_len <= 0:
            raise DataValidationError("window_len must be positive")
        for ent, t_ref in self.reference_time.items():
            t_adm = self.admission_time.get(ent)
            if t_adm is not None and t_ref < t_adm:
                raise DataValidationError(
                    f"entity {ent}: reference_time {t_ref} precedes "
                    f"admission_time {t_adm}")


def _parse_rfc3339(text, path, lineno):
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise DataValidationError(
            f"{path}:{lineno}: bad RFC 3339 timestamp {text!r}") from None


def load_events(path, time_format="rfc3339"):
    """Parse an events CSV (header entity_id,concept,timestamp,value).

    Returns a list of Samples sorted by (entity, concept, t). With
    time_format='rfc3339', timestamps become whole minutes since the
    earliest timestamp in the file.
    """
    if time_format not in ("rfc3339", "minutes"):
        raise DataValidationError(f"unknown time format {time_format!r}")
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
                "entity_id", "concept", "timestamp", "value"]:
            raise DataValidationError(
                f"{path}:1: expected header entity_id,concept,timestamp,value")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise DataValidationError(
                    f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            entity_id, concept, ts_text, value_text = (f.strip() for f in row)
            if not entity_id or not concept:
                raise DataValidationError(
                    f"{path}:{lineno}: empty entity_id or concept")
            bad = _FORBIDDEN_NAME_CHARS.intersection(concept)
            if bad:
                raise DataValidationError(
                    f"{path}:{lineno}: concept {concept!r} contains forbidden "
                    f"characters {sorted(bad)}")
            try:
                value = float(value_text)
            except ValueError:
                raise DataValidationError(
                    f"{path}:{lineno}: bad value {value_text!r}") from None
            if not math.isfinite(value):
                raise DataValidationError(
                    f"{path}:{lineno}: non-finite value {value_text!r}")
            if time_format == "rfc3339":
                ts = _parse_rfc3339(ts_text, path, lineno)
            else:
                try:
                    ts = int(ts_text)
                except ValueError:
                    raise DataValidationError(
                        f"{path}:{lineno}: bad minutes timestamp {ts_text!r}"
                    ) from None
            rows.append((lineno, entity_id, concept, ts, value))

    if time_format == "rfc3339" and rows:
        epoch = min(r[3] for r in rows)
        rows = [(ln, e, c, int((ts - epoch).total_seconds() // 60), v)
                for ln, e, c, ts, v in rows]

    seen = {}
    samples = []
    for lineno, entity_id, concept, t, value in rows:
        key = (entity_id, concept, t)
        if key in seen:
            raise DataValidationError(
                f"{path}:{lineno}: duplicate measurement for "
                f"({entity_id}, {concept}, t={t}); first seen at line {seen[key]}")
        seen[key] = lineno
        samples.append(Sample(entity_id, concept, t, value))
    samples.sort(key=lambda s: (s.entity_id, s.concept, s.t))
    return samples


def group_events(samples):
    """Group samples into entity -> concept -> list sorted by t."""
    out = {}
    for s in samples:
        out.setdefault(s.entity_id, {}).setdefault(s.concept, []).append(s)
    for per_concept in out.values():
        for series in per_concept.values():
            series.sort(key=lambda s: s.t)
    return out


def load_kb(path):
    """Load the declarative KB JSON (array of rule objects)."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(entries, list):
        raise DataValidationError(f"{path}: KB must be a JSON array")
    rules = {}
    required = ("concept", "unit", "normal_low", "normal_high",
                "gradient_delta", "interp_max_gap_min")
    for i, entry in enumerate(entries):
        missing = [k for k in required if k not in entry]
        if missing:
            raise DataValidationError(
                f"{path}: entry {i}: missing fields {missing}")
        labels = entry.get("state_labels")
        rule = AbstractionRule(
            concept=entry["concept"],
            unit=entry["unit"],
            normal_low=float(entry["normal_low"]),
            normal_high=float(entry["normal_high"]),
            gradient_delta=float(entry["gradient_delta"]),
            interp_max_gap=int(entry["interp_max_gap_min"]),
            state_labels=tuple(labels) if labels else DEFAULT_STATE_LABELS,
        )
        if rule.concept in rules:
            raise DataValidationError(
                f"{path}: duplicate concept {rule.concept!r}")
        rules[rule.concept] = rule
    return KnowledgeBase(rules=rules, source=str(path))


def load_labels(path):
    """Load the cohort labels CSV (entity_id,class) into entity -> class."""
    path = Path(path)
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["entity_id", "class"]:
            raise DataValidationError(f"{path}:1: expected header entity_id,class")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DataValidationError(
                    f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            ent, cls = row[0].strip(), row[1].strip()
            if ent in out:
                raise DataValidationError(
                    f"{path}:{lineno}: duplicate entity {ent!r}")
            out[ent] = cls
    return out


def load_reference_times(path, time_format="minutes"):
    """Load entity_id,admission_time,reference_time into two entity maps."""
    path = Path(path)
    admission, reference = {}, {}
    raw = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
                "entity_id", "admission_time", "reference_time"]:
            raise DataValidationError(
                f"{path}:1: expected header entity_id,admission_time,reference_time")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataValidationError(
                    f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            raw.append((lineno, row[0].strip(), row[1].strip(), row[2].strip()))
    for lineno, ent, adm_text, ref_text in raw:
        if time_format == "rfc3339":
            raise DataValidationError(
                "reference-times files must use minutes (the events epoch is "
                "not available here); convert before loading")
        try:
            adm, ref = int(adm_text), int(ref_text)
        except ValueError:
            raise DataValidationError(
                f"{path}:{lineno}: bad minutes timestamp") from None
        if ent in admission:
            raise DataValidationError(f"{path}:{lineno}: duplicate entity {ent!r}")
        admission[ent] = adm
        reference[ent] = ref
    return admission, reference


def window_extract(samples, window_config):
    """Keep lab samples from admission to t_ref, others in the trailing window.

    Both window endpoints are inclusive.
    """
    kept = []
    for s in samples:
        t_ref = window_config.reference_time.get(s.entity_id)
        if t_ref is None:
            raise DataValidationError(
                f"entity {s.entity_id!r} has no reference time")
        if s.concept in window_config.lab_concepts:
            t_adm = window_config.admission_time.get(s.entity_id)
            if t_adm is None:
                raise DataValidationError(
                    f"entity {s.entity_id!r} has no admission time")
            if t_adm <= s.t <= t_ref:
                kept.append(s)
        else:
            if t_ref - window_config.window_len <= s.t <= t_ref:
                kept.append(s)
    return kept
