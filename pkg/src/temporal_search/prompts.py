"""Prompt templates and parsers for structured model replies."""

from __future__ import annotations

import json
import math
import re
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .domain import ConfigError, Interval, KeyframeMemory, Query, format_seconds

PLACEHOLDERS = frozenset(
    {
        "question",
        "options",
        "interval_start_s",
        "interval_end_s",
        "video_duration_s",
        "memory",
        "n",
        "prior_answer",
    }
)
TEMPLATE_NAMES = ("answer", "expand", "evaluate", "keyinfo")

SYSTEM_TEXT = (
    "You are a careful video analyst. You are shown frames sampled from one "
    "segment of a long video, each labelled with its timestamp in seconds."
)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    template: str

    def __post_init__(self):
        if self.name not in TEMPLATE_NAMES:
            raise ConfigError(f"unknown template name {self.name!r}")
        unknown = self.placeholders - PLACEHOLDERS
        if unknown:
            raise ConfigError(f"template {self.name!r} uses unknown placeholders: {', '.join(sorted(unknown))}")

    @property
    def placeholders(self) -> frozenset[str]:
        try:
            fields = {fname for _, fname, _, _ in string.Formatter().parse(self.template) if fname is not None}
        except ValueError as exc:
            raise ConfigError(f"template {self.name!r}: {exc}") from exc
        if "" in fields or any(not f.isidentifier() for f in fields):
            raise ConfigError(f"template {self.name!r} has a positional or malformed placeholder")
        return frozenset(fields)

    def render(self, **context: object) -> str:
        values = {key: "" for key in PLACEHOLDERS}
        values.update({k: "" if v is None else str(v) for k, v in context.items()})
        text = self.template.format(**values)
        # placeholders that rendered empty leave blank lines behind
        return "\n".join(line for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class PromptSet:
    answer: PromptTemplate
    expand: PromptTemplate
    evaluate: PromptTemplate
    keyinfo: PromptTemplate
    system_text: str = SYSTEM_TEXT

    @classmethod
    def load(cls, directory: Optional[str | Path] = None) -> "PromptSet":
        """Load ``{answer,expand,evaluate,keyinfo}.txt`` from ``directory``.

        Files missing from an override directory fall back to the bundled ones.
        """
        templates = {}
        for name in TEMPLATE_NAMES:
            path = Path(directory) / f"{name}.txt" if directory is not None else None
            if path is not None and path.exists():
                text = path.read_text(encoding="utf-8")
            else:
                text = resources.files(__package__).joinpath("prompt_templates", f"{name}.txt").read_text(encoding="utf-8")
            templates[name] = PromptTemplate(name, text)
        return cls(**templates)

    def get(self, name: str) -> PromptTemplate:
        return getattr(self, name)


def render_options(query: Query) -> str:
    return "\n".join(f"{label}. {text}" for label, text in query.labelled())


def render_memory(memory: Optional[KeyframeMemory]) -> str:
    if memory is None or len(memory) == 0:
        return ""
    return "Keyframe notes collected so far:\n" + memory.render()


def build_context(
    query: Query,
    interval: Interval,
    fps: float,
    total_frames: int,
    memory: Optional[KeyframeMemory] = None,
    n: Optional[int] = None,
    prior_answer: Optional[str] = None,
) -> dict[str, object]:
    return {
        "question": query.question,
        "options": render_options(query),
        "interval_start_s": format_seconds(interval.start / fps),
        "interval_end_s": format_seconds(interval.end / fps),
        "video_duration_s": format_seconds(total_frames / fps),
        "memory": render_memory(memory),
        "n": n,
        "prior_answer": prior_answer,
    }


_LEADING_LETTER = re.compile(r"^\s*[\(\[]?([A-Z])[\)\]]?(?=$|[\s.,:;)\]])")
_ANSWER_IS = re.compile(r"answer\s*(?:is|:)?\s*(?:option\s*)?[\(\[]?([A-Z])\b", re.IGNORECASE)


def parse_choice(answer_text: str, options: Sequence[str]) -> Optional[str]:
    """Recover the chosen option label from a free-text reply.

    Tries, in order: a bare option letter at the start of the reply, an
    "answer is X" phrase, and finally an option whose text uniquely matches
    the reply. Returns ``None`` when nothing matches.
    """
    labels = string.ascii_uppercase[: len(options)]
    if not labels:
        return None

    m = _LEADING_LETTER.match(answer_text)
    if m and m.group(1) in labels:
        return m.group(1)

    for m in _ANSWER_IS.finditer(answer_text):
        # a lowercase letter here is usually the article "a", never a label
        if m.group(1) in labels:
            return m.group(1)

    reply = _normalize(answer_text)
    if not reply:
        return None
    normalized = [_normalize(opt) for opt in options]
    inside = [i for i, opt in enumerate(normalized) if opt and opt in reply]
    if len(inside) == 1:
        return labels[inside[0]]
    containing = [i for i, opt in enumerate(normalized) if reply in opt]
    if len(containing) == 1:
        return labels[containing[0]]
    return None


def _normalize(text: str) -> str:
    return " ".join(re.sub(r"[^\w\s]", " ", text.lower()).split())


_NUM = r"(-?\d+(?:\.\d+)?)"
_UNIT = r"\s*(?:s|sec|secs|second|seconds)\b"
_RANGE_SECONDS = re.compile(_NUM + rf"(?:{_UNIT})?\s*(?:-|–|to|and)\s*" + _NUM + _UNIT, re.IGNORECASE)
_CLOCK = r"(\d+:\d{2}(?::\d{2})?)"
_RANGE_CLOCK = re.compile(_CLOCK + r"\s*(?:-|–|to|and)\s*" + _CLOCK)
_JSON_PAIRS = re.compile(r"\[\s*\[.*?\]\s*\]", re.DOTALL)


def parse_intervals(reply: str, fps: float, parent: Interval) -> list[Interval]:
    """Extract second ranges from a reply and convert them to frame intervals.

    A JSON array of ``[start, end]`` pairs is preferred; otherwise ranges like
    ``30-60s``, ``between 30s and 60s`` or ``01:30 to 02:00`` are scanned.
    Starts are floored and ends ceiled to frames, reversed pairs are swapped,
    and everything is clamped to ``parent``. Garbage yields an empty list.
    """
    pairs = _json_pairs(reply)
    if not pairs:
        pairs = [(float(a), float(b)) for a, b in _RANGE_SECONDS.findall(reply)]
        pairs += [(_clock(a), _clock(b)) for a, b in _RANGE_CLOCK.findall(reply)]

    out = []
    for a, b in pairs:
        a, b = a * fps, b * fps
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        if a > b:
            a, b = b, a
        lo = max(math.floor(a), parent.start)
        hi = min(math.ceil(b), parent.end)
        if lo < hi:
            out.append(Interval(lo, hi))
    return out


def _json_pairs(reply: str) -> list[tuple[float, float]]:
    for match in _JSON_PAIRS.finditer(reply):
        try:
            data = json.loads(match.group(0))
        except ValueError:
            continue
        pairs = []
        for item in data:
            if (
                isinstance(item, list)
                and len(item) == 2
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in item)
            ):
                pairs.append((float(item[0]), float(item[1])))
        if pairs:
            return pairs
    return []


def _clock(text: str) -> float:
    seconds = 0.0
    for part in text.split(":"):
        seconds = seconds * 60 + int(part)
    return seconds
