import json
import math
from decimal import Decimal, getcontext

import pytest
from hypothesis import given
from hypothesis import strategies as st

from temporal_search.domain import (
    FinalSelection,
    Interval,
    KeyframeMemory,
    KeyframeNote,
    ModelVerdict,
    Query,
    SearchConfig,
    VideoSource,
    compute_confidence,
    interval_iou,
    node_value,
)
from temporal_search.errors import ConfigError


def decimal_confidence(logprobs):
    """Independent oracle: 50-digit decimal arithmetic."""
    getcontext().prec = 50
    mean = sum(Decimal(repr(lp)) for lp in logprobs) / len(logprobs)
    return float(mean.exp())


class TestInterval:
    def test_rejects_empty_and_negative(self):
        with pytest.raises(ValueError):
            Interval(5, 5)
        with pytest.raises(ValueError):
            Interval(-1, 3)

    def test_geometry(self):
        iv = Interval(10, 30)
        assert iv.length == 20
        assert iv.midpoint == 20
        assert iv.contains(Interval(10, 11))
        assert not iv.contains(Interval(9, 11))
        assert iv.intersect(Interval(25, 40)) == Interval(25, 30)
        assert iv.intersect(Interval(30, 40)) is None
        assert str(iv) == "[10,30)"

    @pytest.mark.parametrize(
        "a, b, expected",
        [((0, 10), (0, 10), 1.0), ((0, 10), (10, 20), 0.0), ((0, 10), (5, 15), 5 / 15)],
    )
    def test_iou_examples(self, a, b, expected):
        assert interval_iou(Interval(*a), Interval(*b)) == pytest.approx(expected)

    @given(st.integers(0, 500), st.integers(1, 500), st.integers(0, 500), st.integers(1, 500))
    def test_iou_symmetric_and_bounded(self, s1, l1, s2, l2):
        a, b = Interval(s1, s1 + l1), Interval(s2, s2 + l2)
        iou = interval_iou(a, b)
        assert iou == interval_iou(b, a)
        assert 0.0 <= iou <= 1.0
        assert (iou == 1.0) == (a == b)


def test_video_source_validation_and_timestamps():
    video = VideoSource("v", 100, 2.0)
    assert video.duration == 50.0
    assert video.full_interval == Interval(0, 100)
    assert video.timestamp(42) == 21.0
    with pytest.raises(ValueError):
        VideoSource("v", 0, 1.0)
    with pytest.raises(ValueError):
        VideoSource("v", 10, 0.0)


def test_query_labels_and_bounds():
    q = Query("q", ("x", "y", "z"), "B")
    assert q.labels == ("A", "B", "C")
    assert q.labelled()[2] == ("C", "z")
    assert Query("free form").labels == ()
    with pytest.raises(ValueError):
        Query("q", ("only",))
    with pytest.raises(ValueError):
        Query("q", ("x", "y"), "C")


class TestConfidence:
    def test_examples(self):
        assert compute_confidence([math.log(1.0)]) == 1.0
        assert compute_confidence([math.log(0.5)] * 2) == pytest.approx(0.5, abs=1e-15)
        assert compute_confidence([math.log(0.9), math.log(0.8), math.log(0.7)]) == pytest.approx(0.7958, abs=1e-4)

    def test_errors(self):
        with pytest.raises(ValueError, match="no generated tokens"):
            compute_confidence([])
        with pytest.raises(ValueError, match="invalid log-probability"):
            compute_confidence([-0.1, 0.2])
        with pytest.raises(ValueError, match="invalid log-probability"):
            compute_confidence([math.nan])

    @given(st.lists(st.floats(-30, 0), min_size=1, max_size=40))
    def test_matches_decimal_oracle_and_is_permutation_invariant(self, logprobs):
        conf = compute_confidence(logprobs)
        assert 0.0 < conf <= 1.0
        assert conf == pytest.approx(decimal_confidence(logprobs), rel=0, abs=1e-12)
        assert compute_confidence(list(reversed(logprobs))) == conf

    def test_verdict_from_logprobs(self):
        v = ModelVerdict.from_logprobs("A", "A", [math.log(0.9)])
        assert v.confidence == pytest.approx(0.9)
        assert v.self_eval is None
        assert v.with_self_eval(0.4).self_eval == 0.4
        with pytest.raises(ValueError):
            v.with_self_eval(1.5)


class TestNodeValue:
    @pytest.mark.parametrize(
        "args, expected",
        [((0.6, 0.7, 1, 1), 1.3), ((0.9, None, 1, 1), 0.9), ((0.5, 0.5, 0.5, 0.5), 0.5)],
    )
    def test_examples(self, args, expected):
        assert node_value(*args) == pytest.approx(expected)

    def test_negative_weight(self):
        with pytest.raises(ConfigError):
            node_value(0.5, 0.5, -1, 1)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, c, e, dc, de):
        assert node_value(min(1, c + dc), min(1, e + de)) >= node_value(c, e)


class TestKeyframeMemory:
    def note(self, t, score=0.0, text=None):
        return KeyframeNote(t, Interval(0, 10), text or f"note at {t}", score)

    def test_sorted_render(self):
        memory = KeyframeMemory().extend([self.note(12, text="later"), self.note(5, text="earlier")])
        assert memory.render() == "[t=5.0s] earlier\n[t=12.0s] later"

    def test_eviction_keeps_highest_scores(self):
        memory = KeyframeMemory(cap=2).extend([self.note(1, 0.5), self.note(2, 1.5), self.note(3, 1.0)])
        assert [n.timestamp for n in memory.notes] == [2, 3]

    def test_eviction_tie_drops_newest(self):
        memory = KeyframeMemory(cap=2).extend([self.note(3, 1.0), self.note(1, 1.0)])
        memory = memory.extend([self.note(2, 1.0)])
        assert [n.timestamp for n in memory.notes] == [1, 3]

    def test_empty_memory_is_falsy(self):
        assert not KeyframeMemory()
        assert KeyframeMemory().render() == ""

    def test_blank_note_rejected(self):
        with pytest.raises(ValueError):
            KeyframeNote(0.0, Interval(0, 1), "  ")

    @given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 2)), max_size=30), st.integers(1, 8))
    def test_invariants(self, raw, cap):
        memory = KeyframeMemory(cap=cap)
        for t, s in raw:
            before = len(memory)
            memory = memory.extend([self.note(t, s)])
            assert len(memory) == min(cap, before + 1)
            stamps = [n.timestamp for n in memory.notes]
            assert stamps == sorted(stamps)


class TestSearchConfig:
    def test_defaults(self):
        cfg = SearchConfig()
        assert (cfg.k, cfg.n, cfg.n_f, cfg.c1, cfg.c2) == (5, 6, 8, 0.9, 0.7)
        assert (cfg.w_conf, cfg.w_eval) == (1.0, 1.0)
        assert cfg.final_selection is FinalSelection.ALL_VISITED
        assert cfg.min_len == 8

    def test_threshold_order_enforced(self):
        with pytest.raises(ConfigError):
            SearchConfig(c1=0.6, c2=0.7)

    def test_round_trip_and_load(self, tmp_path):
        cfg = SearchConfig(k=3, final_selection="frontier_only", seed=11)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert SearchConfig.load(path) == cfg

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="unknown config fields: bogus"):
            SearchConfig.from_dict({"bogus": 1})

    def test_bad_value_becomes_config_error(self):
        with pytest.raises(ConfigError):
            SearchConfig.from_dict({"final_selection": "nope"})
        with pytest.raises(ConfigError):
            SearchConfig.from_dict({"n": 0})
