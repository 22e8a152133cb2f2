"""Per-record outcomes, run reports and confidence-accuracy analyses."""

from __future__ import annotations

import dataclasses
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

DEFAULT_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class RecordOutcome:
    """The result of one manifest record under one strategy."""

    record_id: str
    video_id: str
    duration_group: Optional[str]
    strategy: str
    ground_truth: Optional[str]
    choice: Optional[str]
    correct: bool
    confidence: Optional[float]
    value: Optional[float]
    calls_used: int
    wall_time: float
    stop_reason: Optional[str]
    chosen_interval: Optional[list[int]] = None
    error: Optional[str] = None

    @property
    def aborted(self) -> bool:
        return self.stop_reason is None

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RecordOutcome":
        return cls(**data)


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    accuracy: Optional[float]  # None when no prediction clears the threshold
    support: int


def check_thresholds(thresholds: Iterable[float]) -> list[float]:
    out = []
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"threshold {t} outside [0, 1]")
        out.append(float(t))
    return out


def threshold_curve(
    pairs: Sequence[tuple[float, bool]], thresholds: Iterable[float] = DEFAULT_THRESHOLDS
) -> list[CurvePoint]:
    """Accuracy of the predictions whose confidence is at least each threshold.

    Args:
        pairs: ``(confidence, correct)`` per prediction.
        thresholds: values in ``[0, 1]``.

    Raises:
        ValueError: for a threshold outside ``[0, 1]``.
    """
    points = []
    for t in check_thresholds(thresholds):
        kept = [ok for conf, ok in pairs if conf >= t]
        accuracy = sum(kept) / len(kept) if kept else None
        points.append(CurvePoint(t, accuracy, len(kept)))
    return points


def confidence_means(pairs: Sequence[tuple[float, bool]]) -> tuple[Optional[float], Optional[float]]:
    """Mean confidence of correct and of incorrect predictions."""
    right = [c for c, ok in pairs if ok]
    wrong = [c for c, ok in pairs if not ok]
    mean = lambda xs: sum(xs) / len(xs) if xs else None  # noqa: E731
    return mean(right), mean(wrong)


def outcome_pairs(outcomes: Iterable[RecordOutcome]) -> list[tuple[float, bool]]:
    return [(o.confidence, o.correct) for o in outcomes if o.confidence is not None]


def interval_pairs(trace: Mapping[str, Any], ground_truth: Optional[str]) -> list[tuple[float, bool]]:
    """``(confidence, correct)`` for every answer event in a trace.

    Applied to voting runs this gives the interval-level view: one point per
    slice rather than per video.
    """
    return [
        (e["confidence"], e["choice"] is not None and e["choice"] == ground_truth)
        for e in trace["events"]
        if e["ev"] == "answer"
    ]


def _accuracy(outcomes: Sequence[RecordOutcome]) -> Optional[float]:
    return sum(o.correct for o in outcomes) / len(outcomes) if outcomes else None


def build_report(
    outcomes: Iterable[RecordOutcome],
    strategy: str,
    config: Mapping[str, Any],
    incomplete: bool = False,
) -> dict[str, Any]:
    """Aggregate per-record outcomes into a JSON-ready run report.

    Records are sorted by id, so the report does not depend on completion
    order. Aborted records count as incorrect.
    """
    outcomes = sorted(outcomes, key=lambda o: o.record_id)
    groups: dict[str, list[RecordOutcome]] = defaultdict(list)
    for o in outcomes:
        groups[o.duration_group or "unknown"].append(o)
    pairs = outcome_pairs(outcomes)
    right, wrong = confidence_means(pairs)
    calls = [o.calls_used for o in outcomes]
    return {
        "strategy": strategy,
        "config": dict(config),
        "incomplete": incomplete,
        "num_records": len(outcomes),
        "num_correct": sum(o.correct for o in outcomes),
        "num_aborted": sum(o.aborted for o in outcomes),
        "accuracy": _accuracy(outcomes),
        "accuracy_by_group": {g: _accuracy(groups[g]) for g in sorted(groups)},
        "confidence": {
            "correct_mean": right,
            "incorrect_mean": wrong,
            "gap": right - wrong if right is not None and wrong is not None else None,
        },
        "threshold_curve": [dataclasses.asdict(p) for p in threshold_curve(pairs)],
        "passes": {"mean_calls_used": sum(calls) / len(calls) if calls else None, "accuracy": _accuracy(outcomes)},
        "records": [o.to_dict() for o in outcomes],
    }


def read_traces(path: str | Path) -> list[dict[str, Any]]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def report_from_traces(path: str | Path) -> dict[str, Any]:
    """Rebuild a run report from its ``traces.jsonl`` file."""
    rows = read_traces(path)
    if not rows:
        raise ValueError(f"{path}: no records")
    header = rows[0]["run"]
    outcomes = [RecordOutcome.from_dict(row["outcome"]) for row in rows]
    return build_report(outcomes, header["strategy"], header["config"], header["incomplete"])


def count_inversions(points: Sequence[CurvePoint], min_support: int = 1) -> list[float]:
    """Accuracy drops (as positive numbers) between consecutive well-supported points."""
    kept = [p.accuracy for p in points if p.accuracy is not None and p.support >= min_support]
    return [a - b for a, b in zip(kept, kept[1:]) if b < a]
