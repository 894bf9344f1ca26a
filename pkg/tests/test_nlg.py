from __future__ import annotations

import math
from dataclasses import replace

import pytest

from handover.driver import Modality
from handover.nlg import (
    Budget,
    Fact,
    MissingTemplate,
    Predicate,
    Verbosity,
    compose,
    default_templates,
    estimate_density,
    hazard_fact,
    parse_templates,
    plan_content,
    realize,
    round_distance,
    round_time,
    verbosity_for_load,
)
from handover.tql import CriticalityReport, Level

REPORT = CriticalityReport((), 3.0, Level.ELEVATED, 12.0)


def core(notice=12.4, ack=5.0):
    return [Fact(Predicate.HANDOVER_REQUEST, salience=math.inf, time=notice),
            Fact(Predicate.TIME_BUDGET, salience=math.inf, time=ack)]


class TestRounding:
    def test_distance_nearest_50(self):
        assert round_distance(790.0) == 800
        assert round_distance(770.0) == 750
        assert round_distance(775.0) == 800   # halves up

    def test_time_whole_seconds(self):
        assert round_time(12.4) == 12
        assert round_time(12.5) == 13


class TestRealize:
    def test_terse_core(self):
        msg = realize(core(), Verbosity.TERSE)
        assert msg.text == "Take over. 5s."
        assert msg.word_count == 3

    def test_standard_fog(self):
        msg = realize(core() + [hazard_fact("FOG", 3, 10.0, 790.0, 1.0)],
                      Verbosity.STANDARD)
        assert msg.text == ("Please take over in 12 seconds. "
                            "Respond within 5 seconds. Fog in 800 meters.")

    def test_same_distance_hazards_aggregate(self):
        msg = realize(core() + [hazard_fact("FOG", 3, 10.0, 790.0, 1.0),
                                hazard_fact("CONSTRUCTION", 2, 10.5, 805.0, 1.0)],
                      Verbosity.STANDARD)
        assert "Fog and construction in 800 meters." in msg.text

    def test_distant_hazards_stay_separate(self):
        msg = realize(core() + [hazard_fact("FOG", 3, 10.0, 400.0, 1.0),
                                hazard_fact("ICE", 2, 20.0, 800.0, 1.0)],
                      Verbosity.STANDARD)
        assert "Fog in 400 meters." in msg.text
        assert "Ice in 800 meters." in msg.text

    def test_facts_ordered_by_time_to_event(self):
        msg = realize(core() + [hazard_fact("FOG", 3, 20.0, 800.0, 1.0),
                                hazard_fact("ICE", 2, 5.0, 200.0, 1.0)],
                      Verbosity.TERSE)
        assert msg.text.index("Ice") < msg.text.index("Fog")

    def test_word_count_is_whitespace_tokens(self):
        msg = realize(core(), Verbosity.DETAILED)
        assert msg.word_count == len(msg.text.split())

    def test_missing_template_raises(self):
        table = dict(default_templates())
        del table["HAZARD.TERSE"]
        with pytest.raises(MissingTemplate):
            realize(core() + [hazard_fact("FOG", 3, 10.0, 100.0, 1.0)],
                    Verbosity.TERSE, table)

    def test_template_table_validated_at_load(self):
        with pytest.raises(MissingTemplate):
            parse_templates("{}")

    def test_empty_facts_rejected(self):
        with pytest.raises(ValueError):
            realize([], Verbosity.TERSE)


class TestEstimateDensity:
    def test_audio_rate(self):
        msg = realize(core(), Verbosity.STANDARD)
        msg = replace(msg, word_count=10)
        est, _ = estimate_density(msg, Modality.AUDIO, 100.0)
        assert est == 4.0

    def test_zero_words_always_fit(self):
        msg = realize(core(), Verbosity.TERSE)
        msg = replace(msg, word_count=0)
        est, fits = estimate_density(msg, Modality.AUDIO, 0.001)
        assert est == 0.0 and fits

    def test_budget_boundary(self):
        msg = realize(core(), Verbosity.TERSE)
        msg = replace(msg, word_count=10)
        est, fits = estimate_density(msg, Modality.AUDIO, 10.0)
        assert est == 4.0 and not fits   # 4.0 > 0.3 * 10

    def test_tactile_fixed_pattern(self):
        msg = realize(core(), Verbosity.DETAILED)
        est, fits = estimate_density(msg, Modality.TACTILE, 4.0)
        assert est == 1.0 and fits

    def test_notice_must_be_positive(self):
        msg = realize(core(), Verbosity.TERSE)
        with pytest.raises(ValueError):
            estimate_density(msg, Modality.AUDIO, 0.0)


class TestPlanContent:
    def facts(self, saliences):
        return [Fact(Predicate.HAZARD, salience=s, distance=100.0 * (i + 1),
                     time=5.0 * (i + 1), tag="FOG", order=i)
                for i, s in enumerate(saliences)]

    def test_greedy_keeps_top_saliences(self):
        budget = Budget(Modality.AUDIO, notice=16.0)   # 4.8 s ~ 12 terse words
        selected = plan_content(REPORT, core() + self.facts([3.0, 1.5, 0.5]),
                                budget)
        optional = [f for f in selected if not f.mandatory]
        assert [f.salience for f in optional] == [3.0, 1.5]

    def test_mandatory_core_survives_any_budget(self):
        budget = Budget(Modality.AUDIO, notice=4.0)
        selected = plan_content(REPORT, core() + self.facts([3.0]), budget)
        preds = [f.predicate for f in selected]
        assert preds == [Predicate.HANDOVER_REQUEST, Predicate.TIME_BUDGET]

    def test_equal_salience_keeps_catalog_order(self):
        budget = Budget(Modality.VISUAL, notice=100.0)
        selected = plan_content(REPORT, core() + self.facts([1.0, 1.0, 1.0]),
                                budget)
        optional = [f for f in selected if not f.mandatory]
        assert [f.order for f in optional] == [0, 1, 2]


class TestCompose:
    def facts(self):
        return [hazard_fact("FOG", 3, 10.0, 300.0, 1.0, order=0),
                Fact(Predicate.OBSTACLE, salience=5.0, distance=420.0,
                     time=14.0, order=1),
                Fact(Predicate.ACTION_ADVICE, salience=0.25,
                     action="reduce speed", order=2)]

    def test_verbosity_tracks_load(self):
        for load, verbosity in ((1, Verbosity.DETAILED), (2, Verbosity.STANDARD),
                                (3, Verbosity.TERSE)):
            msg = compose(REPORT, [], Modality.VISUAL, 60.0, load)
            assert msg.verbosity is verbosity
            assert verbosity_for_load(load) is verbosity

    def test_high_load_short_notice_core_only(self):
        msg = compose(REPORT, self.facts(), Modality.AUDIO, 5.0, 3)
        assert [f.predicate for f in msg.facts_included] == \
            [Predicate.HANDOVER_REQUEST, Predicate.TIME_BUDGET]
        assert msg.verbosity is Verbosity.TERSE

    def test_low_load_long_notice_everything(self):
        msg = compose(REPORT, self.facts(), Modality.VISUAL, 60.0, 1)
        assert len(msg.facts_included) == 5
        assert msg.verbosity is Verbosity.DETAILED

    def test_mandatory_core_always_present(self):
        for notice in (5.0, 12.0, 45.0):
            msg = compose(REPORT, self.facts(), Modality.AUDIO, notice, 2)
            preds = [f.predicate for f in msg.facts_included]
            assert Predicate.HANDOVER_REQUEST in preds
            assert Predicate.TIME_BUDGET in preds

    def test_budget_complied_across_grid(self):
        for channel in Modality:
            for notice in (5.0, 10.0, 20.0, 40.0):
                for load in (1, 2, 3):
                    msg = compose(REPORT, self.facts(), channel, notice, load)
                    assert msg.est_duration is not None
                    assert msg.est_duration <= 0.3 * notice

    def test_fact_count_monotone_in_notice(self):
        for channel in Modality:
            for load in (1, 2, 3):
                counts = [len(compose(REPORT, self.facts(), channel,
                                      float(n), load).facts_included)
                          for n in (5, 10, 20, 40)]
                assert counts == sorted(counts)

    def test_fact_count_monotone_in_load(self):
        for channel in Modality:
            for notice in (5.0, 10.0, 20.0, 40.0):
                counts = [len(compose(REPORT, self.facts(), channel, notice,
                                      load).facts_included)
                          for load in (1, 2, 3)]
                assert counts[0] >= counts[1] >= counts[2]

    def test_snapshot_determinism(self):
        a = compose(REPORT, self.facts(), Modality.AUDIO, 14.0, 2)
        b = compose(REPORT, self.facts(), Modality.AUDIO, 14.0, 2)
        assert a.text == b.text and a == b
