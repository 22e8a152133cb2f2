import pytest

from temporal_search.domain import Interval, KeyframeMemory, KeyframeNote, Query
from temporal_search.errors import ConfigError
from temporal_search.prompts import PromptSet, PromptTemplate, build_context, parse_choice, parse_intervals

OPTIONS = ("blue short sleeves", "red long sleeves", "green vest", "no shirt")
QUERY = Query("What is the man wearing?", OPTIONS, "B")


def render(name, memory=None, interval=Interval(0, 1200), fps=1.0, **extra):
    ctx = build_context(QUERY, interval, fps, 3600, memory, **extra)
    return PromptSet.load().get(name).render(**ctx)


def test_answer_prompt_without_memory_has_no_memory_section():
    text = render("answer")
    assert "Keyframe notes" not in text
    assert "A. blue short sleeves" in text and "D. no shirt" in text


def test_expand_prompt_substitutes_count_and_bounds():
    text = render("expand", n=6)
    assert "6" in text and "0.0" in text and "1200.0" in text


def test_memory_rendered_chronologically():
    memory = KeyframeMemory().extend(
        [KeyframeNote(12.0, Interval(0, 24), "man waves"), KeyframeNote(5.0, Interval(0, 10), "man enters")]
    )
    text = render("answer", memory)
    assert text.index("[t=5.0s] man enters") < text.index("[t=12.0s] man waves")


def test_rendering_is_deterministic():
    assert render("evaluate", prior_answer="B") == render("evaluate", prior_answer="B")


def test_unknown_placeholder_rejected_at_load(tmp_path):
    with pytest.raises(ConfigError):
        PromptTemplate("answer", "Question: {question} {bogus}")
    (tmp_path / "answer.txt").write_text("{nope}")
    with pytest.raises(ConfigError):
        PromptSet.load(tmp_path)


def test_override_directory_falls_back_per_template(tmp_path):
    (tmp_path / "answer.txt").write_text("Q: {question}\n{options}")
    prompts = PromptSet.load(tmp_path)
    assert prompts.get("answer").render(**build_context(QUERY, Interval(0, 10), 1.0, 10, None)).startswith("Q: What")
    assert prompts.get("expand").template == PromptSet.load().get("expand").template


@pytest.mark.parametrize(
    "reply, expected",
    [
        ("A", "A"),
        ("B. red long sleeves", "B"),
        ("The answer is (C).", "C"),
        ("I think the answer is D", "D"),
        ("the answer is a mystery", None),
        ("red long sleeves", "B"),
        ("He wears a green vest in the clip", "C"),
        ("sleeves", None),
        ("I am not sure", None),
        ("", None),
    ],
)
def test_parse_choice(reply, expected):
    assert parse_choice(reply, OPTIONS) == expected


def test_parse_choice_ignores_letters_outside_labels():
    assert parse_choice("E", OPTIONS) is None


@pytest.mark.parametrize(
    "reply, fps, parent, expected",
    [
        ("[[30, 60], [90, 120]]", 1.0, (0, 600), [(30, 60), (90, 120)]),
        ("look between 30s and 60s", 2.0, (0, 1200), [(60, 120)]),
        ("I cannot determine this.", 1.0, (0, 600), []),
        ("[[10.0, 20.0]]", 2.0, (0, 200), [(20, 40)]),
        ("[[-5, 30], [90, 400]]", 1.0, (0, 200), [(0, 30), (90, 200)]),
        ("[[60, 30]]", 1.0, (0, 200), [(30, 60)]),
        ("Check 1:00-1:30 please", 1.0, (0, 600), [(60, 90)]),
        ("[[10.2, 10.4]]", 1.0, (0, 600), [(10, 11)]),
        ("[[700, 800]]", 1.0, (0, 600), []),
        ("[[1e308, 1e309]]", 1000.0, (0, 600), []),
    ],
)
def test_parse_intervals(reply, fps, parent, expected):
    assert parse_intervals(reply, fps, Interval(*parent)) == [Interval(*p) for p in expected]
