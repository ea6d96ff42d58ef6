"""Cohort discrimination statistics and bedside scores.

Global comparison: two-sample Kolmogorov-Smirnov over per-pattern support
values. Local comparison: a pooled two-proportion z-test per pattern,
between classes and within each class split 50/50 by a seeded shuffle
(supports are recounted on the halves; the pattern universe is not
re-mined). Patterns are ranked by information gain of their presence
vector against the class labels.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from statistics import NormalDist

from .miner import canonical_string, entities_supporting

# Classical two-sample critical-value coefficients; critical D =
# c(alpha) * sqrt((n1 + n2) / (n1 * n2)).
KS_COEFFICIENTS = {0.10: 1.22, 0.05: 1.36, 0.01: 1.63}


@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    critical_d: float
    alpha: float
    n1: int
    n2: int
    reject: bool


@dataclass(frozen=True)
class ProportionTestResult:
    x1: int
    n1: int
    x2: int
    n2: int
    z: float
    significant: bool


def _entropy(counts):
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def information_gain(feature, labels):
    """IG in bits of a boolean per-entity feature about a two-class label.

    feature and labels are mappings over the same entity set.
    """
    if set(feature) != set(labels):
        raise ValueError("feature and labels must cover the same entities")
    classes = sorted(set(labels.values()))
    if len(classes) < 2:
        raise ValueError("need at least two distinct labels")
    by_class = {c: 0 for c in classes}
    split = {True: dict(by_class), False: dict(by_class)}
    for ent, cls in labels.items():
        by_class[cls] += 1
        split[bool(feature[ent])][cls] += 1
    n = len(labels)
    h_class = _entropy(list(by_class.values()))
    h_cond = 0.0
    for part in split.values():
        size = sum(part.values())
        if size:
            h_cond += size / n * _entropy(list(part.values()))
    return h_class - h_cond


def ks_two_sample(sample1, sample2, alpha=0.05):
    """Exact sup-distance between the two empirical distribution functions."""
    if not sample1 or not sample2:
        raise ValueError("both samples must be non-empty")
    if alpha not in KS_COEFFICIENTS:
        raise ValueError(
            f"alpha must be one of {sorted(KS_COEFFICIENTS)}, got {alpha}")
    s1 = sorted(sample1)
    s2 = sorted(sample2)
    n1, n2 = len(s1), len(s2)
    d = 0.0
    i = j = 0
    while i < n1 and j < n2:
        x = min(s1[i], s2[j])
        while i < n1 and s1[i] <= x:
            i += 1
        while j < n2 and s2[j] <= x:
            j += 1
        d = max(d, abs(i / n1 - j / n2))
    critical = KS_COEFFICIENTS[alpha] * math.sqrt((n1 + n2) / (n1 * n2))
    return KsResult(d, critical, alpha, n1, n2, d > critical)


def proportion_test(x1, n1, x2, n2, alpha=0.05):
    """Pooled two-proportion z-test, two-sided, no continuity correction."""
    if n1 <= 0 or n2 <= 0:
        raise ValueError("group sizes must be positive")
    if not (0 <= x1 <= n1 and 0 <= x2 <= n2):
        raise ValueError("counts must satisfy 0 <= x <= n")
    pooled = (x1 + x2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        z = 0.0
    else:
        se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
        z = (x1 / n1 - x2 / n2) / se
    z_crit = NormalDist().inv_cdf(1 - alpha / 2)
    return ProportionTestResult(x1, n1, x2, n2, z, abs(z) > z_crit)


def qsofa_score(respiratory_rate, systolic_bp, gcs):
    """(score 0-3, positive at >= 2): RR >= 22, SBP <= 100, GCS < 15."""
    score = int(respiratory_rate >= 22) + int(systolic_bp <= 100) + int(gcs < 15)
    return score, score >= 2


def sirs_score(temperature, heart_rate, respiratory_rate,
               paco2=None, wbc=None, immature_bands_pct=None):
    """(score 0-4, positive at >= 2).

    Criteria: temp > 38 or < 36; HR > 90; RR > 20 or PaCO2 < 32;
    WBC (x10^9/L) > 12 or < 4 or > 10% immature bands. Missing PaCO2 /
    WBC / bands leave their criterion evaluated on whatever is present.
    """
    score = 0
    if temperature > 38 or temperature < 36:
        score += 1
    if heart_rate > 90:
        score += 1
    if respiratory_rate > 20 or (paco2 is not None and paco2 < 32):
        score += 1
    wbc_crit = wbc is not None and (wbc > 12 or wbc < 4)
    bands_crit = immature_bands_pct is not None and immature_bands_pct > 10
    if wbc_crit or bands_crit:
        score += 1
    return score, score >= 2


def _percent(different, tested):
    return round(100 * different / tested) if tested else 0


def split_half_counts(entities, supporting, seed):
    """Shuffle entities with a seeded RNG, halve, count support in each half."""
    order = sorted(entities)
    random.Random(seed).shuffle(order)
    half = len(order) // 2
    h1, h2 = order[:half], order[half:]
    x1 = sum(1 for e in h1 if e in supporting)
    x2 = sum(1 for e in h2 if e in supporting)
    return x1, len(h1), x2, len(h2)


@dataclass(frozen=True)
class CohortComparisonReport:
    label_a: str
    label_b: str
    n_a: int
    n_b: int
    total_a: int
    total_b: int
    shared: int
    exclusive_a: int
    exclusive_b: int
    ks: KsResult | None
    ks_domain: str
    alpha: float
    split_seed: int
    proportion_rows: tuple  # three (test, tested, different, percent) rows
    top_patterns: tuple

    def to_dict(self):
        ks_block = None
        if self.ks is not None:
            ks_block = {
                "d": self.ks.d_statistic,
                "critical_d": self.ks.critical_d,
                "alpha": self.ks.alpha,
                "n1": self.ks.n1,
                "n2": self.ks.n2,
                "reject": self.ks.reject,
            }
        return {
            "classes": {
                self.label_a: {"entities": self.n_a, "patterns": self.total_a},
                self.label_b: {"entities": self.n_b, "patterns": self.total_b},
            },
            "totals": {
                "distinct": self.shared + self.exclusive_a + self.exclusive_b,
                "shared": self.shared,
                "exclusive_a": self.exclusive_a,
                "exclusive_b": self.exclusive_b,
            },
            "ks": ks_block,
            "ks_domain": self.ks_domain,
            "alpha": self.alpha,
            "split_seed": self.split_seed,
            "proportion_tests": [dict(row) for row in self.proportion_rows],
            "top_patterns": [dict(p) for p in self.top_patterns],
        }


def compare_cohorts(mined_a, mined_b, entities_a, entities_b,
                    intervals_by_entity, miner_cfg, *, alpha=0.05,
                    ks_domain="shared", split_seed=0, top_n=20,
                    label_a="case", label_b="control"):
    """Full two-cohort comparison over the outputs of two mining runs.

    mined_a / mined_b: [(TIRP, SupportStats)] mined per class at the same
    config. intervals_by_entity must cover both entity sets; presence is
    recounted from it for the split controls and the IG ranking.
    """
    if ks_domain not in ("shared", "union"):
        raise ValueError(f"ks_domain must be shared|union, got {ks_domain!r}")
    entities_a = sorted(entities_a)
    entities_b = sorted(entities_b)
    n_a, n_b = len(entities_a), len(entities_b)
    sup_a = {canonical_string(t): (t, s) for t, s in mined_a}
    sup_b = {canonical_string(t): (t, s) for t, s in mined_b}
    shared_keys = sorted(set(sup_a) & set(sup_b))
    all_keys = sorted(set(sup_a) | set(sup_b))
    tirp_of = {key: (sup_a.get(key) or sup_b[key])[0] for key in all_keys}

    # presence recount over the union of entities (exclusive patterns may
    # still occur below threshold in the other class)
    ivs_a = {e: intervals_by_entity.get(e, []) for e in entities_a}
    ivs_b = {e: intervals_by_entity.get(e, []) for e in entities_b}
    supp_sets_a = {}
    supp_sets_b = {}
    for key in all_keys:
        tirp = tirp_of[key]
        supp_sets_a[key] = entities_supporting(tirp, ivs_a, miner_cfg)
        supp_sets_b[key] = entities_supporting(tirp, ivs_b, miner_cfg)

    if ks_domain == "shared":
        ks_keys = shared_keys
    else:
        ks_keys = all_keys
    ks_result = None
    if ks_keys:
        s1 = [sup_a[k][1].horizontal_support if k in sup_a else 0.0
              for k in ks_keys]
        s2 = [sup_b[k][1].horizontal_support if k in sup_b else 0.0
              for k in ks_keys]
        ks_result = ks_two_sample(s1, s2, alpha)

    between_sig = 0
    for key in shared_keys:
        res = proportion_test(sup_a[key][1].supporting_entities, n_a,
                              sup_b[key][1].supporting_entities, n_b, alpha)
        if res.significant:
            between_sig += 1

    within = {}
    for cls_label, mined, entities, supp_sets in (
            (label_a, mined_a, entities_a, supp_sets_a),
            (label_b, mined_b, entities_b, supp_sets_b)):
        sig = 0
        tested = 0
        for tirp, _ in mined:
            key = canonical_string(tirp)
            x1, h1, x2, h2 = split_half_counts(entities, supp_sets[key],
                                               split_seed)
            if h1 and h2:
                tested += 1
                if proportion_test(x1, h1, x2, h2, alpha).significant:
                    sig += 1
        within[cls_label] = (tested, sig)

    proportion_rows = (
        {"test": f"{label_a} vs. {label_b}", "tested": len(shared_keys),
         "different": between_sig,
         "percent": _percent(between_sig, len(shared_keys))},
        {"test": f"Only {label_a} (50% vs. 50%)",
         "tested": within[label_a][0], "different": within[label_a][1],
         "percent": _percent(within[label_a][1], within[label_a][0])},
        {"test": f"Only {label_b} (50% vs. 50%)",
         "tested": within[label_b][0], "different": within[label_b][1],
         "percent": _percent(within[label_b][1], within[label_b][0])},
    )

    labels = {e: label_a for e in entities_a}
    labels.update({e: label_b for e in entities_b})
    ranked = []
    for key in all_keys:
        present = supp_sets_a[key] | supp_sets_b[key]
        feature = {e: e in present for e in labels}
        ig = information_gain(feature, labels)
        ranked.append((key, ig))
    ranked.sort(key=lambda pair: (-pair[1], pair[0]))
    top = []
    for rank, (key, ig) in enumerate(ranked[:top_n], start=1):
        top.append({
            "rank": rank,
            "tirp": key,
            "ig": ig,
            f"support_{label_a}": len(supp_sets_a[key]) / n_a if n_a else 0.0,
            f"support_{label_b}": len(supp_sets_b[key]) / n_b if n_b else 0.0,
        })

    return CohortComparisonReport(
        label_a=label_a, label_b=label_b, n_a=n_a, n_b=n_b,
        total_a=len(sup_a), total_b=len(sup_b),
        shared=len(shared_keys),
        exclusive_a=len(sup_a) - len(shared_keys),
        exclusive_b=len(sup_b) - len(shared_keys),
        ks=ks_result, ks_domain=ks_domain, alpha=alpha, split_seed=split_seed,
        proportion_rows=proportion_rows, top_patterns=tuple(top),
    )
