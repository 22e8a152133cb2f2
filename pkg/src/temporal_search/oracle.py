"""A simulated video-language model over synthetic videos with one planted event.

The simulated model sees only frame indices. Its confidence rises with the
share of sampled frames that fall inside the planted interval and with how
tightly the sampled interval is zoomed around it, which is exactly the
behaviour the search strategies rely on. Every output is a pure function of
the world and the call inputs, so runs are reproducible under any thread
schedule.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .backend.base import Backend
from .domain import Interval, KeyframeNote, ModelVerdict, Query, VideoSource
from .errors import ConfigError
from .sampling import FrameSample

TOKENS_PER_ANSWER = 4
MIN_CONFIDENCE = 1e-6

_EVENTS = (
    "a dog jumps into the pool",
    "the chef flips a pancake",
    "a red car overtakes a bus",
    "someone opens an umbrella",
    "the lights in the hall go out",
    "a child drops an ice cream",
    "the speaker writes on a whiteboard",
    "a cyclist falls on the gravel",
    "two people shake hands",
    "a cat knocks over a glass",
    "fireworks burst over the river",
    "the goalkeeper saves a penalty",
    "a train enters the tunnel",
    "a woman plants a tree",
    "the crowd starts clapping",
    "a balloon floats away",
)


def _rng(*parts: Any) -> random.Random:
    # str seeds are hashed with SHA-512, stable across processes
    return random.Random(":".join(map(str, parts)))


@dataclass(frozen=True)
class SyntheticWorld:
    """A synthetic video with a planted answer-bearing interval.

    ``resolution_frames`` is the longest interval at which the simulated
    model still perceives the event at full strength; longer intervals scale
    the signal down proportionally. When the signal is too weak to answer,
    the model falls back on a fixed prior guess that happens to be correct
    with probability ``guess_rate`` (drawn once per world); a correct prior
    adds ``prior_boost`` to its confidence.
    """

    total_frames: int
    fps: float
    target: Interval
    fact: str
    correct_choice: str
    options: tuple[str, ...]
    resolution_frames: int
    conf_floor: float = 0.3
    conf_ceil: float = 0.95
    noise_sigma: float = 0.0
    seed: int = 0
    p_hint: float = 0.5
    jitter: float = 1.0
    guess_rate: float = 0.0
    prior_boost: float = 0.0
    video_id: str = "synthetic"
    question: str = "Which event happens in the video?"

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if isinstance(self.target, (list, tuple)):
            object.__setattr__(self, "target", Interval(*self.target))
        if self.target.end > self.total_frames:
            raise ValueError("target must lie inside the video")
        if not 0.0 <= self.conf_floor < self.conf_ceil <= 1.0:
            raise ValueError("need 0 <= conf_floor < conf_ceil <= 1")
        if self.resolution_frames < 1:
            raise ValueError("resolution_frames must be >= 1")
        if self.noise_sigma < 0 or self.jitter < 0:
            raise ValueError("noise_sigma and jitter must be non-negative")
        for name in ("p_hint", "guess_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.correct_choice not in self.query.labels:
            raise ValueError(f"correct_choice {self.correct_choice!r} is not an option label")

    @property
    def video(self) -> VideoSource:
        return VideoSource(self.video_id, self.total_frames, self.fps)

    @property
    def query(self) -> Query:
        return Query(self.question, self.options, self.correct_choice)

    @property
    def prior_choice(self) -> str:
        """The answer the model gives when it has not seen the event."""
        rng = _rng(self.seed, "prior")
        if rng.random() < self.guess_rate:
            return self.correct_choice
        wrong = [label for label in self.query.labels if label != self.correct_choice]
        return rng.choice(wrong)

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data["target"] = self.target.as_list()
        data["options"] = list(self.options)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SyntheticWorld":
        data = dict(data)
        data["target"] = Interval(*data["target"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad synthetic world: {exc}") from exc


def oracle_signal(world: SyntheticWorld, sample: FrameSample) -> tuple[float, float, float]:
    """Return ``(coverage, zoom, signal)`` for a frame sample."""
    hits = sum(1 for i in sample.indices if world.target.start <= i < world.target.end)
    coverage = hits / sample.n_f
    zoom = min(1.0, world.resolution_frames / sample.interval.length)
    return coverage, zoom, coverage * zoom


def _noise(world: SyntheticWorld, sample: FrameSample) -> float:
    if world.noise_sigma == 0:
        return 0.0
    return _rng(world.seed, "noise", *sample.indices).gauss(0.0, world.noise_sigma)


def oracle_confidence(world: SyntheticWorld, sample: FrameSample) -> float:
    _, _, signal = oracle_signal(world, sample)
    conf = world.conf_floor + (world.conf_ceil - world.conf_floor) * signal + _noise(world, sample)
    if signal <= 0.5 and world.prior_choice == world.correct_choice:
        conf += world.prior_boost
    return min(1.0, max(MIN_CONFIDENCE, conf))


def oracle_answer(world: SyntheticWorld, sample: FrameSample, query: Optional[Query] = None) -> ModelVerdict:
    query = query or world.query
    _, _, signal = oracle_signal(world, sample)
    choice = world.correct_choice if signal > 0.5 else world.prior_choice
    logprobs = (math.log(oracle_confidence(world, sample)),) * TOKENS_PER_ANSWER
    text = f"{choice}. {query.options[query.labels.index(choice)]}" if query.options else choice
    return ModelVerdict.from_logprobs(text, choice, logprobs)


def oracle_evaluate(world: SyntheticWorld, sample: FrameSample) -> float:
    return oracle_confidence(world, sample)


def oracle_propose(world: SyntheticWorld, parent: Interval) -> list[Interval]:
    """One proposed sub-interval of ``parent``.

    With probability ``p_hint`` (and only when ``parent`` overlaps the
    target) the proposal is the target widened on each side by up to
    ``jitter`` target lengths; otherwise it is a random stretch covering
    5% to 50% of the parent.
    """
    rng = _rng(world.seed, "propose", parent.start, parent.end)
    visible = world.target.intersect(parent)
    if visible is not None and rng.random() < world.p_hint:
        reach = world.jitter * world.target.length
        lo = math.floor(visible.start - rng.uniform(0, reach))
        hi = math.ceil(visible.end + rng.uniform(0, reach))
        return [Interval(max(parent.start, lo), min(parent.end, hi))]
    length = max(1, round(rng.uniform(0.05, 0.5) * parent.length))
    start = rng.randint(parent.start, parent.end - length)
    return [Interval(start, start + length)]


def oracle_describe(world: SyntheticWorld, sample: FrameSample) -> list[KeyframeNote]:
    coverage, _, _ = oracle_signal(world, sample)
    if coverage <= 0.5:
        return []
    first_hit = next(i for i in sample.indices if world.target.start <= i < world.target.end)
    return [KeyframeNote(first_hit / world.fps, sample.interval, world.fact)]


class OracleBackend(Backend):
    """Backend answering from :class:`SyntheticWorld` objects keyed by video id."""

    def __init__(self, worlds: Union[SyntheticWorld, Mapping[str, SyntheticWorld]]):
        if isinstance(worlds, SyntheticWorld):
            worlds = {worlds.video_id: worlds}
        self.worlds = dict(worlds)

    def _world(self, video: VideoSource) -> SyntheticWorld:
        try:
            return self.worlds[video.id]
        except KeyError:
            raise ConfigError(f"no synthetic world for video {video.id!r}") from None

    def answer(self, video, sample, query, memory):
        return oracle_answer(self._world(video), sample, query)

    def evaluate(self, video, sample, query, verdict, memory):
        return oracle_evaluate(self._world(video), sample)

    def propose(self, video, sample, query, memory, parent, n):
        return oracle_propose(self._world(video), parent)[:n]

    def describe(self, video, sample, query, memory):
        return oracle_describe(self._world(video), sample)


DURATION_GROUPS = ("short", "medium", "long")


@dataclass(frozen=True)
class CorpusSpec:
    """Recipe for a seeded synthetic corpus.

    Durations are in seconds per group. ``guess_rate`` defaults to chance
    (one over the number of options).
    """

    seed: int = 0
    counts: dict[str, int] = field(default_factory=lambda: {"short": 0, "medium": 0, "long": 200})
    durations: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {"short": (30, 120), "medium": (240, 900), "long": (1800, 3600)}
    )
    target_fraction: tuple[float, float] = (0.005, 0.02)
    min_target_frames: int = 2
    fps: float = 1.0
    num_options: int = 4
    conf_floor: float = 0.3
    conf_ceil: float = 0.95
    noise_sigma: float = 0.08
    resolution_factor: float = 3.0
    p_hint: float = 0.5
    jitter: float = 1.0
    guess_rate: Optional[float] = None
    prior_boost: float = 0.15

    def __post_init__(self):
        unknown = (set(self.counts) | set(self.durations)) - set(DURATION_GROUPS)
        if unknown:
            raise ConfigError(f"unknown duration groups: {sorted(unknown)}")
        if any(c < 0 for c in self.counts.values()):
            raise ConfigError("counts must be non-negative")
        undefined = [g for g, c in self.counts.items() if c and g not in self.durations]
        if undefined:
            raise ConfigError(f"no duration range for groups: {', '.join(undefined)}")
        lo, hi = self.target_fraction
        if not 0 < lo <= hi < 1:
            raise ConfigError("target_fraction must satisfy 0 < lo <= hi < 1")
        if not 2 <= self.num_options <= len(_EVENTS):
            raise ConfigError(f"num_options must be in [2, {len(_EVENTS)}]")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CorpusSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown corpus fields: {', '.join(unknown)}")
        data = dict(data)
        if "durations" in data:
            data["durations"] = {k: tuple(v) for k, v in data["durations"].items()}
        if "target_fraction" in data:
            data["target_fraction"] = tuple(data["target_fraction"])
        return cls(**data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CorpusSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CorpusItem:
    world: SyntheticWorld
    query: Query
    record: dict[str, Any]


def generate_corpus(spec: CorpusSpec) -> list[CorpusItem]:
    """Build the corpus described by ``spec``; the same spec always gives the same corpus."""
    guess_rate = spec.guess_rate if spec.guess_rate is not None else 1.0 / spec.num_options
    items = []
    for group in DURATION_GROUPS:
        count = spec.counts.get(group, 0)
        if not count:
            continue
        lo_s, hi_s = spec.durations[group]
        for i in range(count):
            rng = _rng(spec.seed, "corpus", group, i)
            total = max(1, round(rng.uniform(lo_s, hi_s) * spec.fps))
            target_len = max(spec.min_target_frames, round(rng.uniform(*spec.target_fraction) * total))
            target_len = min(target_len, total)
            start = rng.randint(0, total - target_len)
            events = rng.sample(_EVENTS, spec.num_options)
            correct = rng.randrange(spec.num_options)
            video_id = f"syn{spec.seed}-{group}-{i:04d}"
            world = SyntheticWorld(
                total_frames=total,
                fps=spec.fps,
                target=Interval(start, start + target_len),
                fact=f"At this moment {events[correct]}.",
                correct_choice="ABCDEFGHIJKLMNOPQRSTUVWXYZ"[correct],
                options=tuple(events),
                resolution_frames=max(1, round(spec.resolution_factor * target_len)),
                conf_floor=spec.conf_floor,
                conf_ceil=spec.conf_ceil,
                noise_sigma=spec.noise_sigma,
                seed=rng.getrandbits(63),
                p_hint=spec.p_hint,
                jitter=spec.jitter,
                guess_rate=guess_rate,
                prior_boost=spec.prior_boost,
                video_id=video_id,
            )
            record = {
                "id": video_id,
                "video_id": video_id,
                "world": world.to_dict(),
                "total_frames": total,
                "fps": spec.fps,
                "question": world.question,
                "options": list(world.options),
                "answer": world.correct_choice,
                "duration_group": group,
            }
            items.append(CorpusItem(world, world.query, record))
    return items
