import pytest

from tirp_forge.data_model import DataValidationError, group_events
from tirp_forge.kbta import abstract_entity
from tirp_forge.miner import MinerConfig, parse_canonical, support
from tirp_forge.relations import RelationConfig, classify_endpoints
from tirp_forge.synth import (
    PlantedPattern,
    SynthConfig,
    generate,
    realize_layout,
    write_outputs,
)

PLANT = "BodyTemperature.S.High|HeartRate.S.High;<"


def small_config(seed=0, **overrides):
    base = dict(
        n_case=10,
        n_control=10,
        concepts=("WBC", "Lactate", "Glucose"),
        planted=(PlantedPattern(parse_canonical(PLANT), 0.6, 0.1),),
        noise_intervals_per_entity=3.0,
        horizon=10080,
        seed=seed,
    )
    base.update(overrides)
    return SynthConfig(**base)


def abstract_cohort(samples, kb):
    return {ent: abstract_entity(by_concept, kb)
            for ent, by_concept in group_events(samples).items()}


class TestRealizeLayout:
    def test_layout_satisfies_relations(self, kb):
        tirp = parse_canonical(
            "BodyTemperature.S.High|HeartRate.S.High|WBC.S.High;o,<,m")
        rel_cfg = RelationConfig()
        layout = realize_layout(tirp, kb, rel_cfg)
        assert [sym for sym, _, _ in layout] == list(tirp.symbols)
        for i in range(3):
            for j in range(i + 1, 3):
                _, s1, e1 = layout[i]
                _, s2, e2 = layout[j]
                assert classify_endpoints(s1, e1, s2, e2, 0,
                                          rel_cfg.max_gap) == tirp.rel(i, j)

    def test_gradient_symbol_layout(self, kb):
        tirp = parse_canonical(
            "BodyTemperature.S.High|HeartRate.G.Increasing;o")
        layout = realize_layout(tirp, kb, RelationConfig())
        _, start, end = layout[1]
        assert end > start  # gradients need at least two samples

    def test_unrealizable_same_concept_meets(self, kb):
        # two meeting intervals of one concept would merge or bridge under
        # the interpolation gap, so no layout can survive the self-check
        tirp = parse_canonical(
            "BodyTemperature.S.High|BodyTemperature.S.High;m")
        with pytest.raises(DataValidationError,
                           match="BodyTemperature.S.High"):
            realize_layout(tirp, kb, RelationConfig())

    def test_unknown_concept_rejected(self, kb):
        tirp = parse_canonical("NotAConcept.S.High;")
        with pytest.raises(DataValidationError, match="NotAConcept"):
            realize_layout(tirp, kb, RelationConfig())


class TestGenerate:
    def test_same_seed_is_identical(self, kb):
        out1 = generate(small_config(seed=7), kb)
        out2 = generate(small_config(seed=7), kb)
        assert out1 == out2

    def test_different_seed_differs(self, kb):
        s1, *_ = generate(small_config(seed=1), kb)
        s2, *_ = generate(small_config(seed=2), kb)
        assert s1 != s2

    def test_planting_rates_exact(self, kb):
        cfg = small_config(seed=3)
        samples, labels, _, _ = generate(cfg, kb)
        cohort = abstract_cohort(samples, kb)
        tirp = parse_canonical(PLANT)
        mcfg = MinerConfig(relation=RelationConfig(cfg.epsilon, cfg.max_gap))
        cases = {e: cohort.get(e, []) for e in labels if labels[e] == "case"}
        ctrls = {e: cohort.get(e, []) for e in labels if labels[e] == "control"}
        assert support(tirp, cases, mcfg).horizontal_support == 0.6
        assert support(tirp, ctrls, mcfg).horizontal_support == 0.1

    def test_label_and_reference_maps_cover_all_entities(self, kb):
        cfg = small_config(seed=4)
        _, labels, admission, reference = generate(cfg, kb)
        assert len(labels) == 20
        assert sorted(labels.values()).count("case") == 10
        assert set(admission) == set(reference) == set(labels)
        assert set(admission.values()) == {0}
        assert set(reference.values()) == {cfg.horizon}

    def test_noise_avoids_planted_concepts(self, kb):
        samples, labels, _, _ = generate(small_config(seed=5), kb)
        noise_concepts = {s.concept for s in samples
                          if s.concept not in ("BodyTemperature", "HeartRate")}
        assert noise_concepts <= {"WBC", "Lactate", "Glucose"}

    def test_no_duplicate_measurements(self, kb):
        samples, *_ = generate(small_config(seed=6), kb)
        keys = [(s.entity_id, s.concept, s.t) for s in samples]
        assert len(keys) == len(set(keys))

    def test_noise_with_no_free_concepts_rejected(self, kb):
        cfg = small_config(concepts=("BodyTemperature", "HeartRate"))
        with pytest.raises(DataValidationError, match="noise"):
            generate(cfg, kb)

    def test_pattern_must_fit_horizon(self, kb):
        with pytest.raises(DataValidationError, match="horizon"):
            generate(small_config(horizon=30), kb)

    def test_zero_entities_is_empty(self, kb):
        samples, labels, admission, reference = generate(
            small_config(n_case=0, n_control=0), kb)
        assert samples == [] and labels == {}
        assert admission == {} and reference == {}


class TestWriteOutputs:
    def test_files_written_and_byte_stable(self, kb, tmp_path):
        cfg = small_config(seed=9)
        d1 = tmp_path / "run1"
        d2 = tmp_path / "run2"
        write_outputs(cfg, kb, d1)
        write_outputs(cfg, kb, d2)
        for name in ("events.csv", "labels.csv", "reference_times.csv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_round_trip_through_loaders(self, kb, tmp_path):
        from tirp_forge.data_model import (
            load_events, load_labels, load_reference_times)
        cfg = small_config(seed=10)
        out = write_outputs(cfg, kb, tmp_path / "run")
        samples = load_events(out / "events.csv", time_format="minutes")
        expected, labels, _, _ = generate(cfg, kb)
        assert sorted(samples, key=lambda s: (s.entity_id, s.concept, s.t)) \
            == expected
        assert load_labels(out / "labels.csv") == labels
        adm, ref = load_reference_times(out / "reference_times.csv")
        assert set(adm) == set(labels) and set(ref.values()) == {cfg.horizon}


class TestSynthConfig:
    def test_from_dict_round_trip(self):
        data = {
            "n_case": 5, "n_control": 7,
            "concepts": ["WBC", "Lactate"],
            "planted": [{"tirp": PLANT, "case_rate": 0.5,
                         "control_rate": 0.1}],
            "noise_intervals_per_entity": 2.5,
            "horizon": 5000, "seed": 11, "epsilon": 2, "max_gap": 600,
        }
        cfg = SynthConfig.from_dict(data)
        assert cfg.n_case == 5 and cfg.n_control == 7
        assert cfg.planted[0].tirp == parse_canonical(PLANT)
        assert cfg.epsilon == 2 and cfg.max_gap == 600
        assert cfg.label_case == "case"

    def test_invalid_values_rejected(self):
        with pytest.raises(DataValidationError):
            small_config(horizon=0)
        with pytest.raises(DataValidationError):
            small_config(n_case=-1)
        with pytest.raises(DataValidationError):
            PlantedPattern(parse_canonical(PLANT), 1.5, 0.0)
