import pytest
from hypothesis import given
from hypothesis import strategies as st

from temporal_search.domain import Interval, SearchConfig, compute_confidence, interval_iou
from temporal_search.oracle import (
    CorpusSpec,
    OracleBackend,
    SyntheticWorld,
    generate_corpus,
    oracle_answer,
    oracle_describe,
    oracle_evaluate,
    oracle_propose,
    oracle_signal,
)
from temporal_search.sampling import uniform_sample
from temporal_search.search import run_uniform_sampling


def world(**kw):
    base = dict(
        total_frames=1000,
        fps=1.0,
        target=Interval(400, 440),
        fact="the dog catches the frisbee",
        correct_choice="C",
        options=("a", "b", "c", "d"),
        resolution_frames=40,
        conf_floor=0.3,
        conf_ceil=0.9,
        seed=5,
    )
    base.update(kw)
    return SyntheticWorld(**base)


def test_inside_target_gives_ceiling():
    w = world()
    verdict = oracle_answer(w, uniform_sample(Interval(405, 435), 8))
    assert verdict.parsed_choice == "C"
    assert verdict.confidence == pytest.approx(0.9, abs=1e-12)
    assert len(verdict.token_logprobs) == 4
    assert compute_confidence(verdict.token_logprobs) == verdict.confidence


def test_outside_target_gives_floor_and_wrong_choice():
    w = world()
    verdict = oracle_answer(w, uniform_sample(Interval(0, 300), 8))
    assert verdict.parsed_choice != "C" and verdict.parsed_choice in "ABD"
    assert verdict.confidence == pytest.approx(0.3, abs=1e-12)


def test_half_coverage_half_zoom():
    w = world(target=Interval(0, 8), resolution_frames=8)
    sample = uniform_sample(Interval(0, 16), 8)
    assert oracle_signal(w, sample) == (0.5, 0.5, 0.25)
    assert oracle_answer(w, sample).confidence == pytest.approx(0.45, abs=1e-12)


def test_evaluate_matches_confidence():
    w = world(noise_sigma=0.1)
    sample = uniform_sample(Interval(380, 460), 8)
    assert oracle_evaluate(w, sample) == pytest.approx(oracle_answer(w, sample).confidence, abs=1e-12)


def test_noise_is_seeded_by_frames():
    w = world(noise_sigma=0.1)
    a = uniform_sample(Interval(0, 300), 8)
    assert oracle_answer(w, a) == oracle_answer(w, a)
    assert oracle_answer(w, a).confidence != oracle_answer(w, uniform_sample(Interval(0, 301), 8)).confidence


def test_prior_guess_and_boost():
    lucky = world(guess_rate=1.0, prior_boost=0.15)
    verdict = oracle_answer(lucky, uniform_sample(Interval(0, 300), 8))
    assert verdict.parsed_choice == "C"
    assert verdict.confidence == pytest.approx(0.45)


@given(st.integers(0, 900), st.integers(1, 100), st.integers(1, 16))
def test_confidence_follows_signal(start, length, n_f):
    w = world()
    sample = uniform_sample(Interval(start, start + length), n_f)
    _, _, signal = oracle_signal(w, sample)
    assert oracle_answer(w, sample).confidence == pytest.approx(0.3 + 0.6 * signal, abs=1e-12)


@given(st.integers(400, 439), st.integers(1, 40), st.integers(0, 40))
def test_shrinking_inside_target_never_lowers_confidence(start, length, trim):
    w = world()
    outer = Interval(start, min(440, start + length))
    inner = Interval(outer.start, max(outer.start + 1, outer.end - trim))
    assert oracle_answer(w, uniform_sample(inner, 8)).confidence >= oracle_answer(w, uniform_sample(outer, 8)).confidence


def test_zooming_can_lose_sampled_frames():
    # a one-frame event caught by a midpoint at one zoom level and missed at a tighter one
    w = world(target=Interval(45, 46), resolution_frames=100)
    wide, narrow = uniform_sample(Interval(0, 80), 8), uniform_sample(Interval(0, 79), 8)
    assert oracle_signal(w, wide)[2] > oracle_signal(w, narrow)[2]


class TestPropose:
    @given(st.integers(0, 2**32))
    def test_reliable_hint_overlaps_target(self, seed):
        w = world(p_hint=1.0, jitter=1.0, seed=seed)
        (proposal,) = oracle_propose(w, Interval(0, 1000))
        assert interval_iou(proposal, w.target) >= 0.3

    @given(st.integers(0, 2**32), st.integers(0, 900), st.integers(1, 100))
    def test_random_proposals_stay_inside_parent(self, seed, start, length):
        parent = Interval(start, start + length)
        (proposal,) = oracle_propose(world(p_hint=0.0, seed=seed), parent)
        assert parent.contains(proposal)
        assert proposal.length <= max(1, round(0.5 * length))

    def test_parent_without_target_gets_random_interval(self):
        (proposal,) = oracle_propose(world(p_hint=1.0), Interval(0, 300))
        assert Interval(0, 300).contains(proposal)


def test_describe():
    w = world()
    notes = oracle_describe(w, uniform_sample(Interval(400, 440), 8))
    assert notes[0].text == w.fact and notes[0].timestamp == 402.0
    assert oracle_describe(w, uniform_sample(Interval(0, 400), 8)) == []


def test_world_validation():
    with pytest.raises(ValueError):
        world(target=Interval(990, 1010))
    with pytest.raises(ValueError):
        world(conf_floor=0.9, conf_ceil=0.3)
    with pytest.raises(ValueError):
        world(correct_choice="E")


def test_world_round_trip():
    w = world(noise_sigma=0.05, guess_rate=0.25)
    assert SyntheticWorld.from_dict(w.to_dict()) == w


def test_backend_routes_by_video_id():
    a, b = world(video_id="a"), world(video_id="b", correct_choice="A")
    backend = OracleBackend({"a": a, "b": b})
    sample = uniform_sample(Interval(405, 435), 8)
    assert backend.answer(b.video, sample, b.query, None).parsed_choice == "A"
    with pytest.raises(Exception):
        backend.answer(world(video_id="c").video, sample, a.query, None)


class TestCorpus:
    def test_deterministic(self):
        spec = CorpusSpec(seed=7, counts={"short": 3, "medium": 3, "long": 3})
        assert generate_corpus(spec) == generate_corpus(spec)
        assert generate_corpus(spec) != generate_corpus(CorpusSpec(seed=8, counts=spec.counts))

    def test_long_group_ranges(self):
        items = generate_corpus(CorpusSpec(seed=1))
        assert len(items) == 200
        for item in items:
            w = item.world
            assert 1800 <= w.total_frames <= 3600
            assert w.target.length <= 0.02 * w.total_frames + 1
            assert item.record["duration_group"] == "long"
            assert item.record["answer"] == w.correct_choice

    def test_single_pass_near_chance_on_tiny_targets(self):
        items = generate_corpus(CorpusSpec(seed=2, target_fraction=(0.01, 0.01)))
        backend = OracleBackend({i.world.video_id: i.world for i in items})
        correct = sum(
            run_uniform_sampling(i.world.video, i.query, backend, SearchConfig()).choice == i.world.correct_choice
            for i in items
        )
        assert abs(correct / len(items) - 0.25) < 0.1

    def test_corpus_recipe_validation(self, tmp_path):
        with pytest.raises(Exception):
            CorpusSpec.from_dict({"colour": 1})
        with pytest.raises(Exception):
            CorpusSpec(counts={"huge": 1})
        path = tmp_path / "corpus.json"
        path.write_text('{"seed": 3, "counts": {"short": 2}, "durations": {"short": [10, 20]}}')
        spec = CorpusSpec.load(path)
        assert spec.durations["short"] == (10, 20)
        assert all(10 <= i.world.total_frames <= 20 for i in generate_corpus(spec))
        with pytest.raises(Exception, match="no duration range"):
            CorpusSpec(counts={"medium": 1}, durations={})
