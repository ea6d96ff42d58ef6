"""Seeded synthetic two-cohort generator.

Stands in for a real labeled event log: plants chosen interval patterns at
class-specific rates and sprinkles noise measurements. Planted patterns are
emitted as raw samples that the abstraction rules turn back into intervals
satisfying the pattern's relation matrix, so the whole pipeline is
exercised end to end. Every layout is self-checked by abstracting its own
samples before any entity is generated.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .data_model import DataValidationError, STATE, Sample
from .kbta import abstract_entity
from .miner import (
    MinerConfig,
    TIRP,
    canonical_string,
    find_instances,
    parse_canonical,
)
from .relations import RelationConfig, classify_endpoints

# Layout search grid (minutes, relative to the pattern's slot)
_GRID_STEP = 60
_GRID_MAX_START = 1920
_STATE_SPANS = (0, 120, 240)
_GRADIENT_SPANS = (120, 240)
_SLOT_STRIDE = 4200  # > the widest layout plus the largest interpolation gap


@dataclass(frozen=True)
class PlantedPattern:
    tirp: TIRP
    case_rate: float
    control_rate: float

    def __post_init__(self):
        for rate in (self.case_rate, self.control_rate):
            if not 0 <= rate <= 1:
                raise DataValidationError(f"planting rate {rate} not in [0,1]")


@dataclass(frozen=True)
class SynthConfig:
    n_case: int
    n_control: int
    concepts: tuple
    planted: tuple  # of PlantedPattern
    noise_intervals_per_entity: float
    horizon: int
    seed: int
    epsilon: int = 0
    max_gap: int = 720
    label_case: str = "case"
    label_control: str = "control"

    def __post_init__(self):
        if self.horizon <= 0:
            raise DataValidationError("horizon must be positive")
        if self.n_case < 0 or self.n_control < 0:
            raise DataValidationError("entity counts must be >= 0")
        if self.noise_intervals_per_entity < 0:
            raise DataValidationError("noise mean must be >= 0")

    @classmethod
    def from_dict(cls, data):
        planted = tuple(
            PlantedPattern(parse_canonical(p["tirp"]),
                           float(p["case_rate"]), float(p["control_rate"]))
            for p in data.get("planted", []))
        return cls(
            n_case=int(data["n_case"]),
            n_control=int(data["n_control"]),
            concepts=tuple(data["concepts"]),
            planted=planted,
            noise_intervals_per_entity=float(
                data.get("noise_intervals_per_entity", 0)),
            horizon=int(data["horizon"]),
            seed=int(data["seed"]),
            epsilon=int(data.get("epsilon", 0)),
            max_gap=int(data.get("max_gap", 720)),
            label_case=data.get("label_case", "case"),
            label_control=data.get("label_control", "control"),
        )

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _poisson(rng, lam):
    if lam <= 0:
        return 0
    threshold = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= threshold:
            return k
        k += 1


def _state_value(rule, label):
    idx = rule.state_labels.index(label)
    if idx == 0:
        return rule.normal_low - rule.gradient_delta
    if idx == 2:
        return rule.normal_high + rule.gradient_delta
    return (rule.normal_low + rule.normal_high) / 2


def _interval_samples(entity_id, symbol, start, end, rule):
    """Raw samples whose abstraction reproduces exactly this interval."""
    span = end - start
    if symbol.kind == STATE:
        value = _state_value(rule, symbol.label)
        if span == 0:
            times = [start]
        else:
            step = min(rule.interp_max_gap, span)
            times = list(range(start, end, step))
            times.append(end)
        return [Sample(entity_id, symbol.concept, t, value) for t in times]
    # gradient: ramp with per-step delta beyond the threshold
    step = min(rule.interp_max_gap, span)
    times = list(range(start, end, step))
    times.append(end)
    sign = {"Increasing": 1, "Stable": 0, "Decreasing": -1}[symbol.label]
    base = (rule.normal_low + rule.normal_high) / 2
    per_step = sign * rule.gradient_delta * 1.5
    return [Sample(entity_id, symbol.concept, t, base + i * per_step)
            for i, t in enumerate(times)]


def _layout_ok(tirp, layout, kb, rel_cfg):
    """Abstract the layout's own samples and check the pattern appears."""
    samples = []
    seen = set()
    for symbol, start, end in layout:
        for s in _interval_samples("probe", symbol, start, end,
                                   kb.rule_for(symbol.concept)):
            if (s.concept, s.t) in seen:
                return False
            seen.add((s.concept, s.t))
            samples.append(s)
    by_concept = {}
    for s in sorted(samples, key=lambda s: (s.concept, s.t)):
        by_concept.setdefault(s.concept, []).append(s)
    intervals = abstract_entity(by_concept, kb)
    probe_cfg = MinerConfig(relation=rel_cfg)
    return bool(find_instances(tirp, intervals, probe_cfg, first_only=True))


def realize_layout(tirp, kb, rel_cfg, max_checks=200):
    """Concrete (symbol, start, end) placements satisfying the half-matrix.

    Backtracking over a coarse grid; placements must be lexicographically
    increasing, match every pairwise relation, and keep same-concept
    intervals farther apart than the concept's interpolation gap so that
    abstraction cannot merge or bridge them. Raises when no layout survives
    the abstraction self-check.
    """
    for symbol in tirp.symbols:
        if kb.rule_for(symbol.concept) is None:
            raise DataValidationError(
                f"planted pattern {canonical_string(tirp)}: concept "
                f"{symbol.concept!r} not in knowledge base")
    k = tirp.k
    checks = 0

    def candidates(symbol):
        spans = _STATE_SPANS if symbol.kind == STATE else _GRADIENT_SPANS
        for start in range(0, _GRID_MAX_START + 1, _GRID_STEP):
            for span in spans:
                yield start, start + span

    def compatible(placed, pos, start, end):
        symbol = tirp.symbols[pos]
        for prev_pos, (p_sym, p_start, p_end) in enumerate(placed):
            if (p_start, p_end) > (start, end):
                return False
            r = classify_endpoints(p_start, p_end, start, end,
                                   rel_cfg.epsilon, rel_cfg.max_gap)
            if r != tirp.rel(prev_pos, pos):
                return False
            if p_sym.concept == symbol.concept:
                gap = start - p_end
                if gap <= kb.rule_for(symbol.concept).interp_max_gap:
                    return False
        return True

    def search(placed):
        nonlocal checks
        pos = len(placed)
        if pos == k:
            checks += 1
            if checks > max_checks:
                raise DataValidationError(
                    f"planted pattern {canonical_string(tirp)}: no realizable "
                    f"layout found within {max_checks} candidate checks")
            if _layout_ok(tirp, placed, kb, rel_cfg):
                return list(placed)
            return None
        for start, end in candidates(tirp.symbols[pos]):
            if compatible(placed, pos, start, end):
                placed.append((tirp.symbols[pos], start, end))
                found = search(placed)
                if found:
                    return found
                placed.pop()
        return None

    layout = search([])
    if layout is None:
        raise DataValidationError(
            f"planted pattern {canonical_string(tirp)} is unrealizable "
            f"under the knowledge base and relation config")
    return layout


def generate(cfg, kb):
    """Deterministically generate (samples, labels, admission, reference)."""
    for concept in cfg.concepts:
        if kb.rule_for(concept) is None:
            raise DataValidationError(f"concept {concept!r} not in knowledge base")
    rel_cfg = RelationConfig(cfg.epsilon, cfg.max_gap)

    layouts = []
    planted_concepts = set()
    for p_idx, planted in enumerate(cfg.planted):
        layout = realize_layout(planted.tirp, kb, rel_cfg)
        offset = p_idx * _SLOT_STRIDE
        extent = max(end for _, _, end in layout) + offset
        if extent > cfg.horizon:
            raise DataValidationError(
                f"planted pattern {canonical_string(planted.tirp)} does not "
                f"fit the horizon ({extent} > {cfg.horizon} min)")
        layouts.append([(sym, start + offset, end + offset)
                        for sym, start, end in layout])
        planted_concepts.update(sym.concept for sym, _, _ in layout)

    case_ids = [f"case{i:04d}" for i in range(cfg.n_case)]
    ctrl_ids = [f"ctrl{i:04d}" for i in range(cfg.n_control)]
    labels = {e: cfg.label_case for e in case_ids}
    labels.update({e: cfg.label_control for e in ctrl_ids})

    planted_for = {e: [] for e in (*case_ids, *ctrl_ids)}
    for p_idx, planted in enumerate(cfg.planted):
        for ids, rate, tag in ((case_ids, planted.case_rate, "case"),
                               (ctrl_ids, planted.control_rate, "control")):
            count = round(rate * len(ids))
            rng = random.Random(f"{cfg.seed}:plant:{p_idx}:{tag}")
            for ent in rng.sample(ids, count):
                planted_for[ent].append(p_idx)

    noise_pool = [c for c in cfg.concepts if c not in planted_concepts]
    if cfg.noise_intervals_per_entity > 0 and not noise_pool:
        raise DataValidationError(
            "no concepts left for noise: every configured concept is used "
            "by a planted pattern")

    samples = []
    for ent in (*case_ids, *ctrl_ids):
        used = set()
        for p_idx in planted_for[ent]:
            for symbol, start, end in layouts[p_idx]:
                for s in _interval_samples(ent, symbol, start, end,
                                           kb.rule_for(symbol.concept)):
                    used.add((s.concept, s.t))
                    samples.append(s)
        rng = random.Random(f"{cfg.seed}:noise:{ent}")
        n_noise = _poisson(rng, cfg.noise_intervals_per_entity)
        for _ in range(n_noise):
            concept = rng.choice(noise_pool)
            rule = kb.rule_for(concept)
            label = rng.choice(rule.state_labels)
            for _attempt in range(20):
                t = rng.randrange(0, cfg.horizon + 1)
                if (concept, t) not in used:
                    used.add((concept, t))
                    samples.append(Sample(ent, concept, t,
                                          _state_value(rule, label)))
                    break

    samples.sort(key=lambda s: (s.entity_id, s.concept, s.t))
    admission = {e: 0 for e in (*case_ids, *ctrl_ids)}
    reference = {e: cfg.horizon for e in (*case_ids, *ctrl_ids)}
    return samples, labels, admission, reference


def write_outputs(cfg, kb, out_dir):
    """Generate and write events.csv, labels.csv, reference_times.csv."""
    samples, labels, admission, reference = generate(cfg, kb)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "events.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity_id", "concept", "timestamp", "value"])
        for s in samples:
            w.writerow([s.entity_id, s.concept, s.t, f"{s.value:g}"])
    with open(out_dir / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity_id", "class"])
        for ent in sorted(labels):
            w.writerow([ent, labels[ent]])
    with open(out_dir / "reference_times.csv", "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity_id", "admission_time", "reference_time"])
        for ent in sorted(admission):
            w.writerow([ent, admission[ent], reference[ent]])
    return out_dir
