"""Frame selection inside intervals and candidate selection for node expansion."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .domain import Interval, interval_iou


@dataclass(frozen=True)
class FrameSample:
    interval: Interval
    indices: tuple[int, ...]

    @property
    def n_f(self) -> int:
        return len(self.indices)


def uniform_sample(interval: Interval, n_f: int, rng: Optional[random.Random] = None) -> FrameSample:
    """Pick ``n_f`` frame indices spread evenly over ``interval``.

    The default is the midpoint rule: slot ``i`` takes the frame at
    ``start + floor((i + 0.5) * length / n_f)``. Intervals shorter than
    ``n_f`` repeat frames so exactly ``n_f`` indices come back.

    Passing ``rng`` switches to seeded random sampling (sorted, with
    replacement) for experiments that want jittered frame positions.
    """
    if n_f < 1:
        raise ValueError("n_f must be >= 1")
    length = interval.length
    if rng is None:
        indices = tuple(interval.start + ((2 * i + 1) * length) // (2 * n_f) for i in range(n_f))
    else:
        indices = tuple(sorted(rng.randrange(interval.start, interval.end) for _ in range(n_f)))
    return FrameSample(interval, indices)


def uniform_split(interval: Interval, n: int) -> list[Interval]:
    """Partition ``interval`` into ``n`` contiguous pieces with rounded boundaries.

    Boundary ``j`` sits at ``start + round(j * length / n)`` (half rounds up).
    Empty pieces are dropped, so short intervals yield fewer than ``n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    length = interval.length
    bounds = [interval.start + (2 * j * length + n) // (2 * n) for j in range(n + 1)]
    return [Interval(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]


def select_candidates(
    heuristic: Sequence[Interval],
    uniform: Sequence[Interval],
    n: int,
    parent: Interval,
    min_len: int,
    rng: random.Random,
    dedup_iou: float = 0.9,
) -> list[Interval]:
    """Choose at most ``n`` child intervals from model proposals and uniform splits.

    Candidates are clamped to ``parent``, intervals shorter than ``min_len``
    are dropped and near-duplicates (IoU above ``dedup_iou``) collapse onto the
    earlier-listed one. Heuristic proposals are taken first; uniform pieces
    fill the remaining slots. Whenever a group has more members than free
    slots, members are drawn without replacement from ``rng`` and keep their
    listed order. If nothing survives filtering the parent is split uniformly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    kept: list[tuple[Interval, bool]] = []
    for is_heur, group in ((True, heuristic), (False, uniform)):
        for iv in group:
            clamped = iv.clamp(parent)
            if clamped is None or clamped.length < min_len:
                continue
            if any(interval_iou(clamped, other) > dedup_iou for other, _ in kept):
                continue
            kept.append((clamped, is_heur))

    if not kept:
        return uniform_split(parent, n)[:n]

    heur = [iv for iv, is_heur in kept if is_heur]
    unif = [iv for iv, is_heur in kept if not is_heur]
    chosen = _draw(heur, n, rng)
    chosen += _draw(unif, n - len(chosen), rng)
    return chosen


def _draw(pool: list[Interval], slots: int, rng: random.Random) -> list[Interval]:
    if slots <= 0:
        return []
    if len(pool) <= slots:
        return list(pool)
    picked = sorted(rng.sample(range(len(pool)), slots))
    return [pool[i] for i in picked]
