"""Core value types and the confidence/value arithmetic shared by every module."""

from __future__ import annotations

import dataclasses
import json
import math
import string
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .errors import ConfigError, TemporalSearchError


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open frame-index range ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid interval [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def midpoint(self) -> float:
        return (self.start + self.end) / 2

    def contains(self, other: "Interval") -> bool:
        return self.start <= other.start and other.end <= self.end

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        lo, hi = max(self.start, other.start), min(self.end, other.end)
        return Interval(lo, hi) if lo < hi else None

    def clamp(self, parent: "Interval") -> Optional["Interval"]:
        return self.intersect(parent)

    def as_list(self) -> list[int]:
        return [self.start, self.end]

    def __str__(self) -> str:
        return f"[{self.start},{self.end})"


def interval_iou(a: Interval, b: Interval) -> float:
    """Intersection over union of two intervals, measured in frames."""
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    return inter / union


@dataclass(frozen=True)
class VideoSource:
    """A video as ``total_frames`` frames at ``fps``; frames are resolved by a FrameStore."""

    id: str
    total_frames: int
    fps: float

    def __post_init__(self):
        if self.total_frames < 1:
            raise ValueError("total_frames must be >= 1")
        if not self.fps > 0:
            raise ValueError("fps must be > 0")

    @property
    def duration(self) -> float:
        return self.total_frames / self.fps

    @property
    def full_interval(self) -> Interval:
        return Interval(0, self.total_frames)

    def timestamp(self, index: int) -> float:
        return index / self.fps


@dataclass(frozen=True)
class Query:
    """A question with optional lettered options (``A``, ``B``, ...)."""

    question: str
    options: tuple[str, ...] = ()
    ground_truth: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if self.options and not 2 <= len(self.options) <= 26:
            raise ValueError("a multiple-choice query needs 2..26 options")
        if self.ground_truth is not None and self.options and self.ground_truth not in self.labels:
            raise ValueError(f"ground truth {self.ground_truth!r} is not an option label")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(string.ascii_uppercase[: len(self.options)])

    def labelled(self) -> list[tuple[str, str]]:
        return list(zip(self.labels, self.options))


@dataclass(frozen=True)
class ModelVerdict:
    """One answer inference: generated text, parsed option, token log-probs."""

    answer_text: str
    parsed_choice: Optional[str]
    token_logprobs: tuple[float, ...]
    confidence: float
    self_eval: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "token_logprobs", tuple(self.token_logprobs))
        if self.self_eval is not None and not 0.0 <= self.self_eval <= 1.0:
            raise ValueError(f"self_eval {self.self_eval} outside [0, 1]")

    @classmethod
    def from_logprobs(
        cls, answer_text: str, parsed_choice: Optional[str], token_logprobs: Sequence[float]
    ) -> "ModelVerdict":
        return cls(answer_text, parsed_choice, tuple(token_logprobs), compute_confidence(token_logprobs))

    def with_self_eval(self, score: Optional[float]) -> "ModelVerdict":
        return dataclasses.replace(self, self_eval=score)


def compute_confidence(token_logprobs: Sequence[float]) -> float:
    """Geometric-mean probability of the generated tokens.

    This is ``exp`` of the average token log-probability, so it lives in
    ``(0, 1]`` and can be compared against probability-scale thresholds.

    Raises:
        ValueError: if the list is empty or holds a positive log-probability.
    """
    if len(token_logprobs) == 0:
        raise ValueError("no generated tokens")
    for lp in token_logprobs:
        if not lp <= 0.0:
            raise ValueError(f"invalid log-probability {lp!r}")
    return math.exp(math.fsum(token_logprobs) / len(token_logprobs))


def node_value(confidence: float, self_eval: Optional[float], w_conf: float = 1.0, w_eval: float = 1.0) -> float:
    """Priority of a search node; a missing self-evaluation contributes 0."""
    if w_conf < 0 or w_eval < 0:
        raise ConfigError("value weights must be non-negative")
    return w_conf * confidence + w_eval * (self_eval if self_eval is not None else 0.0)


class NodeOrigin(str, Enum):
    ROOT = "root"
    HEURISTIC = "heuristic"
    UNIFORM_SPLIT = "uniform_split"


class NodeStatus(str, Enum):
    FRONTIER = "frontier"
    EXPANDED = "expanded"
    TERMINAL = "terminal"


@dataclass
class SearchNode:
    # status is the only field mutated during a search
    id: int
    interval: Interval
    verdict: ModelVerdict
    value: float
    parent_id: Optional[int] = None
    depth: int = 0
    origin: NodeOrigin = NodeOrigin.ROOT
    status: NodeStatus = NodeStatus.FRONTIER


@dataclass(frozen=True)
class KeyframeNote:
    """A model-written description of frames, anchored at ``timestamp`` seconds.

    ``score`` is the value of the node that produced the note; it decides which
    notes survive when the memory is over capacity.
    """

    timestamp: float
    source_interval: Interval
    text: str
    score: float = 0.0

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("keyframe note text must be non-empty")
        if self.timestamp < 0:
            raise ValueError("negative timestamp")


@dataclass(frozen=True)
class KeyframeMemory:
    """Timestamp-sorted set of keyframe notes shared across one search."""

    notes: tuple[KeyframeNote, ...] = ()
    cap: int = 20

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(sorted(self.notes, key=_note_key)))
        if len(self.notes) > self.cap:
            raise ValueError("memory over capacity")

    def __len__(self) -> int:
        return len(self.notes)

    def __bool__(self) -> bool:
        return bool(self.notes)

    def extend(self, new_notes: Iterable[KeyframeNote]) -> "KeyframeMemory":
        """Return a memory holding the old and new notes, evicting by score."""
        merged = list(self.notes) + list(new_notes)
        if len(merged) > self.cap:
            # lowest score goes first; among equal scores the newest note is dropped
            ranked = sorted(range(len(merged)), key=lambda i: (-merged[i].score, i))
            keep = set(ranked[: self.cap])
            merged = [note for i, note in enumerate(merged) if i in keep]
        return KeyframeMemory(tuple(merged), self.cap)

    def render(self) -> str:
        return "\n".join(f"[t={format_seconds(n.timestamp)}s] {n.text}" for n in self.notes)


def _note_key(note: KeyframeNote):
    return (note.timestamp, note.source_interval.start, note.source_interval.end, note.text)


def format_seconds(seconds: float) -> str:
    return f"{seconds:.1f}"


class FinalSelection(str, Enum):
    ALL_VISITED = "all_visited"
    FRONTIER_ONLY = "frontier_only"


@dataclass(frozen=True)
class SearchConfig:
    """Search budget, thresholds and value weights.

    Defaults follow the reference setup: 5 iterations, 6 expansions per step,
    8 frames per call, early-stop at confidence 0.9 and keyframe notes above 0.7.
    """

    k: int = 5
    n: int = 6
    n_f: int = 8
    c1: float = 0.9
    c2: float = 0.7
    w_conf: float = 1.0
    w_eval: float = 1.0
    parallel_width: int = 1
    seed: int = 0
    final_selection: FinalSelection = FinalSelection.ALL_VISITED
    min_interval_frames: Optional[int] = None  # None means n_f
    dedup_iou: float = 0.9
    visited_iou: float = 0.95
    utv_intervals: int = 8
    memory_cap: int = 20
    random_frame_sampling: bool = False

    def __post_init__(self):
        object.__setattr__(self, "final_selection", FinalSelection(self.final_selection))
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        for name in ("n", "n_f", "parallel_width", "utv_intervals", "memory_cap"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not (0.0 <= self.c2 <= self.c1 <= 1.0):
            raise ConfigError(f"thresholds must satisfy 0 <= c2 <= c1 <= 1, got c1={self.c1}, c2={self.c2}")
        if self.w_conf < 0 or self.w_eval < 0:
            raise ConfigError("value weights must be non-negative")
        if self.min_interval_frames is not None and self.min_interval_frames < 1:
            raise ConfigError("min_interval_frames must be >= 1")
        if not -(2**63) <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    @property
    def min_len(self) -> int:
        return self.min_interval_frames if self.min_interval_frames is not None else self.n_f

    def replace(self, **changes: Any) -> "SearchConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data["final_selection"] = self.final_selection.value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SearchConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "SearchConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


__all__ = [
    "ConfigError",
    "FinalSelection",
    "Interval",
    "KeyframeMemory",
    "KeyframeNote",
    "ModelVerdict",
    "NodeOrigin",
    "NodeStatus",
    "Query",
    "SearchConfig",
    "SearchNode",
    "TemporalSearchError",
    "VideoSource",
    "compute_confidence",
    "format_seconds",
    "interval_iou",
    "node_value",
]
