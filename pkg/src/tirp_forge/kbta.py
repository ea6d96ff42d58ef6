"""Knowledge-based temporal abstraction: raw sample series -> symbolic intervals.

State intervals merge maximal runs of equally-classified samples whose
adjacent gaps stay within the rule's interpolation max-gap. Gradient
intervals label each adjacent sample pair by its delta and merge equal runs.
Interval ends stop at the last supporting sample; isolated samples yield
point intervals.
"""

from __future__ import annotations

import logging

from .data_model import GRADIENT, STATE, Symbol, SymbolicInterval

log = logging.getLogger(__name__)


def classify_state(value, rule):
    """Low / Normal / High (or the rule's custom labels); normal range closed."""
    low, normal, high = rule.state_labels
    if value < rule.normal_low:
        return low
    if value > rule.normal_high:
        return high
    return normal


def classify_gradient(prev_value, next_value, rule):
    """Decreasing / Stable / Increasing; |delta| equal to the threshold is Stable."""
    d = next_value - prev_value
    if d > rule.gradient_delta:
        return "Increasing"
    if d < -rule.gradient_delta:
        return "Decreasing"
    return "Stable"


def abstract_state_series(samples, rule):
    """Merge same-label sample runs (gaps <= interp_max_gap) into intervals."""
    intervals = []
    run_label = None
    run_start = run_end = None
    entity_id = None
    prev_t = None
    for s in samples:
        entity_id = s.entity_id
        label = classify_state(s.value, rule)
        broken = prev_t is not None and s.t - prev_t > rule.interp_max_gap
        if label == run_label and not broken:
            run_end = s.t
        else:
            if run_label is not None:
                intervals.append(SymbolicInterval(
                    entity_id, Symbol(rule.concept, STATE, run_label),
                    run_start, run_end))
            run_label, run_start, run_end = label, s.t, s.t
        prev_t = s.t
    if run_label is not None:
        intervals.append(SymbolicInterval(
            entity_id, Symbol(rule.concept, STATE, run_label),
            run_start, run_end))
    return intervals


def abstract_gradient_series(samples, rule):
    """Label adjacent sample pairs by delta; merge equal-label adjacent spans.

    Pairs with a gap beyond interp_max_gap emit nothing and break the run.
    """
    intervals = []
    run_label = None
    run_start = run_end = None
    entity_id = None
    for prev, cur in zip(samples, samples[1:]):
        entity_id = cur.entity_id
        if cur.t - prev.t > rule.interp_max_gap:
            if run_label is not None:
                intervals.append(SymbolicInterval(
                    entity_id, Symbol(rule.concept, GRADIENT, run_label),
                    run_start, run_end))
                run_label = None
            continue
        label = classify_gradient(prev.value, cur.value, rule)
        if label == run_label and run_end == prev.t:
            run_end = cur.t
        else:
            if run_label is not None:
                intervals.append(SymbolicInterval(
                    entity_id, Symbol(rule.concept, GRADIENT, run_label),
                    run_start, run_end))
            run_label, run_start, run_end = label, prev.t, cur.t
    if run_label is not None:
        intervals.append(SymbolicInterval(
            entity_id, Symbol(rule.concept, GRADIENT, run_label),
            run_start, run_end))
    return intervals


def abstract_entity(events_by_concept, kb):
    """All state and gradient intervals for one entity, sorted.

    events_by_concept: concept -> list of Samples sorted by t.
    Concepts missing from the KB are skipped with a warning.
    """
    intervals = []
    for concept, series in events_by_concept.items():
        rule = kb.rule_for(concept)
        if rule is None:
            log.warning("concept %r not in knowledge base; skipped", concept)
            continue
        intervals.extend(abstract_state_series(series, rule))
        intervals.extend(abstract_gradient_series(series, rule))
    intervals.sort(key=lambda iv: iv.sort_key())
    return intervals
