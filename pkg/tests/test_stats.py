import math
import random

import pytest
from hypothesis import given, settings, strategies as st

try:
    from scipy.stats import ks_2samp
except ImportError:  # pragma: no cover - scipy is an optional test oracle
    ks_2samp = None

from tirp_forge.data_model import STATE, Symbol, SymbolicInterval
from tirp_forge.miner import MinerConfig, mine
from tirp_forge.stats import (
    KS_COEFFICIENTS,
    compare_cohorts,
    information_gain,
    ks_two_sample,
    proportion_test,
    qsofa_score,
    sirs_score,
    split_half_counts,
)


def feature_labels(flags_a, flags_b):
    """Build feature/labels maps from per-class presence flag lists."""
    feature = {}
    labels = {}
    for i, flag in enumerate(flags_a):
        feature[f"a{i}"] = flag
        labels[f"a{i}"] = "case"
    for i, flag in enumerate(flags_b):
        feature[f"b{i}"] = flag
        labels[f"b{i}"] = "control"
    return feature, labels


class TestInformationGain:
    def test_closed_form_example(self):
        # 10 entities, balanced classes; present in 4/5 cases and 1/5
        # controls: IG = 1 - [0.5*H(0.8) + 0.5*H(0.8)] = 1 - H(0.8)
        feature, labels = feature_labels(
            [True] * 4 + [False], [True] + [False] * 4)
        expected = 1.0 - (-(0.8 * math.log2(0.8) + 0.2 * math.log2(0.2)))
        assert information_gain(feature, labels) == pytest.approx(
            0.2780719051126377, abs=1e-12)
        assert information_gain(feature, labels) == pytest.approx(
            expected, abs=1e-12)

    def test_uninformative_feature_is_zero(self):
        feature, labels = feature_labels([True] * 5, [True] * 5)
        assert information_gain(feature, labels) == pytest.approx(0.0, abs=1e-12)

    def test_perfect_separator_is_class_entropy(self):
        feature, labels = feature_labels([True] * 5, [False] * 5)
        assert information_gain(feature, labels) == pytest.approx(1.0, abs=1e-12)

    def test_requires_two_classes(self):
        feature = {"a": True, "b": False}
        with pytest.raises(ValueError):
            information_gain(feature, {"a": "case", "b": "case"})

    def test_requires_matching_entities(self):
        with pytest.raises(ValueError):
            information_gain({"a": True}, {"a": "case", "b": "control"})

    @given(st.lists(st.booleans(), min_size=1, max_size=12),
           st.lists(st.booleans(), min_size=1, max_size=12))
    def test_invariants(self, flags_a, flags_b):
        feature, labels = feature_labels(flags_a, flags_b)
        ig = information_gain(feature, labels)
        n = len(labels)
        p = len(flags_a) / n
        h_class = -(p * math.log2(p) + (1 - p) * math.log2(1 - p)) \
            if 0 < p < 1 else 0.0
        assert -1e-12 <= ig <= h_class + 1e-12
        # complementing the feature leaves IG unchanged
        flipped = {e: not v for e, v in feature.items()}
        assert information_gain(flipped, labels) == pytest.approx(ig, abs=1e-12)
        # swapping the class names leaves IG unchanged
        swapped = {e: "control" if c == "case" else "case"
                   for e, c in labels.items()}
        assert information_gain(feature, swapped) == pytest.approx(ig, abs=1e-12)


class TestKsTwoSample:
    def test_identical_samples_d_zero(self):
        res = ks_two_sample([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
        assert res.d_statistic == 0.0
        assert not res.reject

    def test_disjoint_samples_d_one(self):
        res = ks_two_sample([0.0, 0.1], [0.9, 1.0], alpha=0.05)
        assert res.d_statistic == 1.0

    def test_critical_value_formula(self):
        res = ks_two_sample(list(range(50)), list(range(200)), alpha=0.05)
        assert res.critical_d == pytest.approx(
            1.36 * math.sqrt((50 + 200) / (50 * 200)), abs=1e-12)
        for alpha, coeff in KS_COEFFICIENTS.items():
            res = ks_two_sample([1, 2], [3, 4], alpha=alpha)
            assert res.critical_d == pytest.approx(coeff * math.sqrt(1.0))

    def test_rejects_unknown_alpha(self):
        with pytest.raises(ValueError):
            ks_two_sample([1], [2], alpha=0.02)

    def test_rejects_empty_sample(self):
        with pytest.raises(ValueError):
            ks_two_sample([], [1.0])

    def test_simple_quarter_shift(self):
        # EDF gap is exactly 0.5 at x = 2
        res = ks_two_sample([1, 2, 3, 4], [3, 4, 5, 6])
        assert res.d_statistic == pytest.approx(0.5, abs=1e-12)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=40),
           st.lists(st.floats(-100, 100), min_size=1, max_size=40))
    def test_symmetric_and_bounded(self, s1, s2):
        d12 = ks_two_sample(s1, s2).d_statistic
        d21 = ks_two_sample(s2, s1).d_statistic
        assert d12 == pytest.approx(d21, abs=1e-12)
        assert 0.0 <= d12 <= 1.0

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=30),
           st.lists(st.integers(-50, 50), min_size=1, max_size=30))
    def test_invariant_under_increasing_transform(self, s1, s2):
        d_raw = ks_two_sample(s1, s2).d_statistic
        f = lambda x: x ** 3 + 2 * x
        d_mapped = ks_two_sample([f(x) for x in s1],
                                 [f(x) for x in s2]).d_statistic
        assert d_raw == pytest.approx(d_mapped, abs=1e-12)

    @pytest.mark.skipif(ks_2samp is None, reason="scipy unavailable")
    @settings(max_examples=60)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=30),
           st.lists(st.integers(0, 20), min_size=1, max_size=30))
    def test_matches_scipy_statistic(self, s1, s2):
        ours = ks_two_sample(s1, s2).d_statistic
        theirs = ks_2samp(s1, s2).statistic
        assert ours == pytest.approx(theirs, abs=1e-12)


class TestProportionTest:
    def test_frozen_z_example(self):
        # 30/50 vs. 10/40: pooled p = 4/9, se = sqrt(1/90),
        # so z = (0.6 - 0.25) * sqrt(90)
        res = proportion_test(30, 50, 10, 40)
        assert res.z == pytest.approx(0.35 * math.sqrt(90), abs=1e-12)
        assert res.z == pytest.approx(3.3203915431767986, abs=1e-12)
        assert res.significant

    def test_symmetric_counts_give_zero(self):
        res = proportion_test(10, 20, 10, 20)
        assert res.z == 0.0
        assert not res.significant

    def test_antisymmetry(self):
        a = proportion_test(30, 50, 10, 40)
        b = proportion_test(10, 40, 30, 50)
        assert a.z == pytest.approx(-b.z, abs=1e-12)

    def test_degenerate_pooled_proportion(self):
        assert proportion_test(0, 10, 0, 10).z == 0.0
        assert proportion_test(10, 10, 10, 10).z == 0.0

    def test_input_validation(self):
        with pytest.raises(ValueError):
            proportion_test(1, 0, 0, 5)
        with pytest.raises(ValueError):
            proportion_test(6, 5, 0, 5)

    def test_alpha_tightens_threshold(self):
        res05 = proportion_test(16, 20, 9, 20, alpha=0.05)
        res01 = proportion_test(16, 20, 9, 20, alpha=0.01)
        assert res05.z == res01.z
        assert res05.significant and not res01.significant


class TestBedsideScores:
    def test_qsofa_all_criteria(self):
        assert qsofa_score(24, 95, 12) == (3, True)

    def test_qsofa_two_criteria(self):
        assert qsofa_score(22, 100, 15) == (2, True)

    def test_qsofa_none(self):
        assert qsofa_score(16, 120, 15) == (0, False)

    def test_qsofa_boundaries(self):
        assert qsofa_score(21.9, 100.1, 15) == (0, False)

    def test_sirs_fever_and_tachycardia(self):
        assert sirs_score(38.5, 95, 16) == (2, True)

    def test_sirs_all_normal(self):
        assert sirs_score(37.0, 80, 16, paco2=40, wbc=8) == (0, False)

    def test_sirs_hypothermia_and_leukopenia(self):
        assert sirs_score(35.5, 80, 16, wbc=3.5) == (2, True)

    def test_sirs_paco2_and_bands(self):
        assert sirs_score(37.0, 80, 16, paco2=30,
                          immature_bands_pct=12) == (2, True)

    def test_sirs_missing_optionals_do_not_count(self):
        assert sirs_score(37.0, 80, 16) == (0, False)

    def test_sirs_boundaries_exclusive(self):
        assert sirs_score(38.0, 90, 20, paco2=32, wbc=12,
                          immature_bands_pct=10) == (0, False)


class TestSplitHalfCounts:
    def test_deterministic_for_seed(self):
        entities = [f"e{i}" for i in range(11)]
        supporting = {"e0", "e3", "e7"}
        first = split_half_counts(entities, supporting, seed=42)
        assert split_half_counts(entities, supporting, seed=42) == first
        x1, n1, x2, n2 = first
        assert (n1, n2) == (5, 6)
        assert x1 + x2 == 3

    def test_counts_conserved_across_seeds(self):
        entities = [f"e{i}" for i in range(20)]
        supporting = {f"e{i}" for i in range(8)}
        for seed in range(10):
            x1, n1, x2, n2 = split_half_counts(entities, supporting, seed)
            assert x1 + x2 == 8 and n1 == n2 == 10

    def test_false_positive_rate_near_alpha(self):
        # calibration: regenerate an independent Bernoulli presence vector
        # per trial so the two halves are independent binomials; the split
        # test should then fire at roughly the nominal rate
        rng = random.Random(123)
        alpha = 0.05
        entities = [f"e{i}" for i in range(200)]
        trials = 400
        fired = 0
        for trial in range(trials):
            supporting = {e for e in entities if rng.random() < 0.5}
            x1, n1, x2, n2 = split_half_counts(entities, supporting, trial)
            if proportion_test(x1, n1, x2, n2, alpha).significant:
                fired += 1
        assert 0.5 * alpha <= fired / trials <= 2 * alpha


class TestCompareCohorts:
    def build(self):
        sym_bt = Symbol("BodyTemperature", STATE, "High")
        sym_hr = Symbol("HeartRate", STATE, "High")
        cohort = {}
        for i in range(8):
            ent = f"a{i}"
            ivs = [SymbolicInterval(ent, sym_bt, 0, 100)]
            if i < 6:
                ivs.append(SymbolicInterval(ent, sym_hr, 200, 300))
            cohort[ent] = ivs
        for i in range(8):
            ent = f"b{i}"
            ivs = [SymbolicInterval(ent, sym_bt, 0, 100)]
            if i < 1:
                ivs.append(SymbolicInterval(ent, sym_hr, 200, 300))
            cohort[ent] = ivs
        entities_a = [f"a{i}" for i in range(8)]
        entities_b = [f"b{i}" for i in range(8)]
        cfg = MinerConfig(min_support=0.1, max_pattern_len=2)
        mined_a = mine({e: cohort[e] for e in entities_a}, cfg)
        mined_b = mine({e: cohort[e] for e in entities_b}, cfg)
        return mined_a, mined_b, entities_a, entities_b, cohort, cfg

    def test_mirrored_cohorts_show_no_difference(self):
        # class B is an entity-for-entity copy of class A
        sym_bt = Symbol("BodyTemperature", STATE, "High")
        sym_hr = Symbol("HeartRate", STATE, "High")
        cohort = {}
        for prefix in ("a", "b"):
            for i in range(8):
                ent = f"{prefix}{i}"
                ivs = [SymbolicInterval(ent, sym_bt, 0, 100)]
                if i < 6:
                    ivs.append(SymbolicInterval(ent, sym_hr, 200, 300))
                cohort[ent] = ivs
        entities_a = [f"a{i}" for i in range(8)]
        entities_b = [f"b{i}" for i in range(8)]
        cfg = MinerConfig(min_support=0.1, max_pattern_len=2)
        mined_a = mine({e: cohort[e] for e in entities_a}, cfg)
        mined_b = mine({e: cohort[e] for e in entities_b}, cfg)
        report = compare_cohorts(mined_a, mined_b, entities_a, entities_b,
                                 cohort, cfg)
        assert report.ks.d_statistic == 0.0
        assert not report.ks.reject
        assert report.exclusive_a == report.exclusive_b == 0
        assert report.proportion_rows[0]["different"] == 0

    def test_report_structure_and_percentages(self):
        mined_a, mined_b, ea, eb, cohort, cfg = self.build()
        report = compare_cohorts(mined_a, mined_b, ea, eb, cohort, cfg)
        assert len(report.proportion_rows) == 3
        names = [row["test"] for row in report.proportion_rows]
        assert names == ["case vs. control", "Only case (50% vs. 50%)",
                         "Only control (50% vs. 50%)"]
        for row in report.proportion_rows:
            expected = (round(100 * row["different"] / row["tested"])
                        if row["tested"] else 0)
            assert row["percent"] == expected
        assert report.shared + report.exclusive_a == report.total_a
        assert report.shared + report.exclusive_b == report.total_b

    def test_top_patterns_ranked_by_information_gain(self):
        mined_a, mined_b, ea, eb, cohort, cfg = self.build()
        report = compare_cohorts(mined_a, mined_b, ea, eb, cohort, cfg)
        igs = [p["ig"] for p in report.top_patterns]
        assert igs == sorted(igs, reverse=True)
        assert [p["rank"] for p in report.top_patterns] == list(
            range(1, len(igs) + 1))
        # the discriminating symbol tops the ranking; the ubiquitous one
        # carries zero gain
        by_tirp = {p["tirp"]: p for p in report.top_patterns}
        assert report.top_patterns[0]["ig"] == pytest.approx(
            by_tirp["HeartRate.S.High;"]["ig"])
        assert by_tirp["BodyTemperature.S.High;"]["ig"] == pytest.approx(
            0.0, abs=1e-12)
        assert by_tirp["HeartRate.S.High;"]["support_case"] == 0.75
        assert by_tirp["HeartRate.S.High;"]["support_control"] == 0.125

    def test_union_ks_domain_includes_exclusives(self):
        mined_a, mined_b, ea, eb, cohort, cfg = self.build()
        shared = compare_cohorts(mined_a, mined_b, ea, eb, cohort, cfg,
                                 ks_domain="shared")
        union = compare_cohorts(mined_a, mined_b, ea, eb, cohort, cfg,
                                ks_domain="union")
        assert union.ks.n1 >= shared.ks.n1
        with pytest.raises(ValueError):
            compare_cohorts(mined_a, mined_b, ea, eb, cohort, cfg,
                            ks_domain="bogus")

    def test_to_dict_round_trips_key_fields(self):
        mined_a, mined_b, ea, eb, cohort, cfg = self.build()
        report = compare_cohorts(mined_a, mined_b, ea, eb, cohort, cfg,
                                 label_a="sepsis", label_b="ward")
        d = report.to_dict()
        assert set(d["classes"]) == {"sepsis", "ward"}
        assert d["totals"]["distinct"] == (d["totals"]["shared"]
                                           + d["totals"]["exclusive_a"]
                                           + d["totals"]["exclusive_b"])
        assert len(d["proportion_tests"]) == 3
