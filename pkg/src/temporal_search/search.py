"""Temporal search strategies: sequential zoom-in, best-first tree search and two baselines.

Every strategy returns a :class:`SearchResult` carrying a :class:`SearchTrace`,
an ordered event log that fully determines the outcome given the backend's
replies. Traces are identical whatever ``parallel_width`` is: sibling nodes
are evaluated as one batch and merged in child-index order.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
import random
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Generic, Iterable, Optional, Sequence, TypeVar

from .backend import Backend
from .domain import (
    FinalSelection,
    Interval,
    KeyframeMemory,
    ModelVerdict,
    NodeOrigin,
    NodeStatus,
    Query,
    SearchConfig,
    SearchNode,
    VideoSource,
    interval_iou,
    node_value,
)
from .errors import BackendError
from .sampling import FrameSample, select_candidates, uniform_sample, uniform_split

logger = logging.getLogger(__name__)

T = TypeVar("T")
CALL_KINDS = ("answer", "evaluate", "propose", "describe")


class StopReason(str, Enum):
    CONFIDENCE_EXCEEDED_C1 = "confidence_exceeded_c1"
    BUDGET_EXHAUSTED = "budget_exhausted"


class Frontier(Generic[T]):
    """Max-priority queue; among equal priorities the earliest pushed pops first."""

    def __init__(self):
        self._heap: list[tuple[float, int, T]] = []
        self._counter = itertools.count()

    def push(self, item: T, value: float) -> None:
        heapq.heappush(self._heap, (-value, next(self._counter), item))

    def pop(self) -> T:
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)

    def items(self) -> list[T]:
        """Contents in insertion order."""
        return [entry[2] for entry in sorted(self._heap, key=lambda e: e[1])]


def _r(x: Optional[float]) -> Optional[float]:
    return None if x is None else round(x, 9)


def _fmt(x: Optional[float]) -> str:
    return "-" if x is None else format(x, ".6g")


@dataclass
class SearchTrace:
    events: list[dict[str, Any]] = field(default_factory=list)
    calls: dict[str, int] = field(default_factory=lambda: dict.fromkeys(CALL_KINDS, 0))

    def log(self, ev: str, **fields: Any) -> None:
        self.events.append({"ev": ev, **fields})

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())

    def to_dict(self) -> dict[str, Any]:
        return {"events": self.events, "calls": dict(self.calls)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SearchTrace":
        return cls(list(data["events"]), dict(data["calls"]))

    def lines(self) -> list[str]:
        """One human-readable line per event."""
        return [_render_event(e) for e in self.events]


def _iv(pair: Sequence[int]) -> str:
    return f"[{pair[0]},{pair[1]})"


def _render_event(e: dict[str, Any]) -> str:
    ev = e["ev"]
    node = f"#{e['node']}" if "node" in e else ""
    if ev == "root":
        return f"root {node} {_iv(e['interval'])}"
    if ev == "answer":
        return f"answer {node} {_iv(e['interval'])} {e['choice'] or '-'} {_fmt(e['confidence'])}"
    if ev == "evaluate":
        return f"evaluate {node} {_fmt(e['self_eval'])}"
    if ev in ("push", "pop", "best_so_far"):
        return f"{ev} {node} {_fmt(e['value'])}"
    if ev == "propose":
        return f"propose {node} " + (" ".join(_iv(p) for p in e["intervals"]) or "-")
    if ev == "expand":
        return f"expand {node} " + (" ".join(f"{_iv(c['interval'])}:{c['origin']}" for c in e["children"]) or "-")
    if ev == "fallback":
        return f"fallback {node} {_iv(e['interval'])}"
    if ev == "memory":
        return f"memory {node} +{e['added']} ={e['size']}"
    if ev == "early_return":
        return f"early_return {node}"
    if ev == "final":
        return f"final {node} {e['selection']}"
    if ev == "vote":
        kept = ",".join(f"#{i}" for i in e["kept"])
        return f"vote {e['winner'] or '-'} kept={kept}"
    if ev == "error":
        return f"error {e['stage']} {node}".rstrip()
    return json.dumps(e)


@dataclass
class SearchResult:
    strategy: str
    answer: ModelVerdict
    chosen_interval: Interval
    stop_reason: StopReason
    trace: SearchTrace
    value: float
    nodes: list[SearchNode] = field(default_factory=list, repr=False)
    memory: KeyframeMemory = field(default_factory=KeyframeMemory, repr=False)
    error: Optional[str] = None

    @property
    def calls_used(self) -> int:
        return self.trace.total_calls

    @property
    def choice(self) -> Optional[str]:
        return self.answer.parsed_choice


@dataclass
class _ChildOutcome:
    sample: FrameSample
    verdict: Optional[ModelVerdict] = None
    score: Optional[float] = None
    answer_error: Optional[BackendError] = None
    eval_error: Optional[BackendError] = None


class _Run:
    """State shared by the steps of one search run."""

    def __init__(self, strategy: str, video: VideoSource, query: Query, backend: Backend, config: SearchConfig):
        self.strategy = strategy
        self.video = video
        self.query = query
        self.backend = backend
        self.config = config
        self.trace = SearchTrace()
        self.rng = random.Random(config.seed)
        self.memory = KeyframeMemory(cap=config.memory_cap)
        self.nodes: list[SearchNode] = []
        self._calls_lock = threading.Lock()

    # backend calls -------------------------------------------------------

    def _count(self, kind: str) -> None:
        with self._calls_lock:
            self.trace.calls[kind] += 1

    def sample(self, interval: Interval) -> FrameSample:
        rng = None
        if self.config.random_frame_sampling:
            rng = random.Random(f"{self.config.seed}:{interval.start}:{interval.end}")
        return uniform_sample(interval, self.config.n_f, rng)

    def answer(self, sample: FrameSample, memory: KeyframeMemory) -> ModelVerdict:
        self._count("answer")
        return self.backend.answer(self.video, sample, self.query, memory)

    def evaluate(self, sample: FrameSample, verdict: ModelVerdict, memory: KeyframeMemory) -> float:
        self._count("evaluate")
        return self.backend.evaluate(self.video, sample, self.query, verdict, memory)

    def propose(self, sample: FrameSample, parent: Interval, n: int) -> list[Interval]:
        self._count("propose")
        proposals = self.backend.propose(self.video, sample, self.query, self.memory, parent, n)
        return [iv for iv in proposals if parent.contains(iv)][:n]

    def describe(self, node: SearchNode, sample: FrameSample) -> None:
        self._count("describe")
        try:
            notes = self.backend.describe(self.video, sample, self.query, self.memory)
        except BackendError as exc:
            self.trace.log("error", stage="describe", node=node.id, message=str(exc))
            return
        if not notes:
            return
        notes = [replace(note, score=node.value) for note in notes]
        self.memory = self.memory.extend(notes)
        self.trace.log("memory", node=node.id, added=len(notes), size=len(self.memory))

    def map(self, fn: Callable[[Any], T], items: Sequence[Any]) -> list[T]:
        width = min(self.config.parallel_width, len(items))
        if width <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=width) as pool:
            return list(pool.map(fn, items))

    # nodes -----------------------------------------------------------------

    def add_node(
        self,
        interval: Interval,
        verdict: ModelVerdict,
        parent: Optional[SearchNode],
        origin: NodeOrigin,
    ) -> SearchNode:
        node = SearchNode(
            id=len(self.nodes),
            interval=interval,
            verdict=verdict,
            value=node_value(verdict.confidence, verdict.self_eval, self.config.w_conf, self.config.w_eval),
            parent_id=parent.id if parent else None,
            depth=parent.depth + 1 if parent else 0,
            origin=origin,
        )
        self.nodes.append(node)
        return node

    def log_answer(self, node: SearchNode) -> None:
        self.trace.log(
            "answer",
            node=node.id,
            interval=node.interval.as_list(),
            choice=node.verdict.parsed_choice,
            confidence=_r(node.verdict.confidence),
        )

    def lineage(self, node: SearchNode) -> list[Interval]:
        out = []
        current: Optional[SearchNode] = node
        while current is not None:
            out.append(current.interval)
            current = self.nodes[current.parent_id] if current.parent_id is not None else None
        return out

    def best(self, nodes: Iterable[SearchNode]) -> SearchNode:
        # parseable answers outrank unparseable ones; ties go to the earlier node
        return max(nodes, key=lambda nd: (nd.verdict.parsed_choice is not None, nd.value, -nd.id))

    def finish(self, node: SearchNode, reason: StopReason, selection: str, error: Optional[str] = None) -> SearchResult:
        if reason is StopReason.CONFIDENCE_EXCEEDED_C1:
            node.status = NodeStatus.TERMINAL
            self.trace.log("early_return", node=node.id)
        self.trace.log("final", node=node.id, selection=selection)
        return SearchResult(
            strategy=self.strategy,
            answer=node.verdict,
            chosen_interval=node.interval,
            stop_reason=reason,
            trace=self.trace,
            value=node.value,
            nodes=self.nodes,
            memory=self.memory,
            error=error,
        )

    def abort(self, stage: str, node_id: Optional[int], exc: BackendError) -> SearchResult:
        fields = {"node": node_id} if node_id is not None else {}
        self.trace.log("error", stage=stage, message=str(exc), **fields)
        return self.finish(self.best(self.nodes), StopReason.BUDGET_EXHAUSTED, "best_so_far", error=str(exc))


def _centered_half(interval: Interval) -> Interval:
    half = max(1, interval.length // 2)
    start = interval.start + (interval.length - half) // 2
    return Interval(start, start + half)


def _start_root(run: _Run) -> tuple[FrameSample, SearchNode]:
    interval = run.video.full_interval
    run.trace.log("root", node=0, interval=interval.as_list())
    sample = run.sample(interval)
    verdict = run.answer(sample, run.memory)
    node = run.add_node(interval, verdict, None, NodeOrigin.ROOT)
    run.log_answer(node)
    return sample, node


def run_uniform_sampling(video: VideoSource, query: Query, backend: Backend, config: SearchConfig) -> SearchResult:
    """Single pass over ``n_f`` frames spread across the whole video."""
    run = _Run("us", video, query, backend, config)
    _, root = _start_root(run)
    return run.finish(root, StopReason.BUDGET_EXHAUSTED, "single_pass")


def run_uniform_temporal_voting(
    video: VideoSource,
    query: Query,
    backend: Backend,
    config: SearchConfig,
    num_intervals: Optional[int] = None,
) -> SearchResult:
    """Answer on each of ``num_intervals`` equal slices and vote.

    Only verdicts with above-mean confidence vote (all of them when every
    confidence is equal). The winner has the most votes; ties go to the
    choice with the highest single confidence, then to the earliest slice.
    """
    if num_intervals is None:
        num_intervals = config.utv_intervals
    if num_intervals < 1:
        raise ValueError("num_intervals must be >= 1")
    run = _Run("utv", video, query, backend, config)
    pieces = uniform_split(video.full_interval, num_intervals)
    memory = run.memory

    def work(piece: Interval):
        try:
            return run.answer(run.sample(piece), memory)
        except BackendError as exc:
            return exc

    outcomes = run.map(work, pieces)
    for piece, outcome in zip(pieces, outcomes):
        if isinstance(outcome, BackendError):
            if run.nodes:
                return run.abort("answer", None, outcome)
            raise outcome
        run.log_answer(run.add_node(piece, outcome, None, NodeOrigin.UNIFORM_SPLIT))

    nodes = run.nodes
    mean = sum(nd.verdict.confidence for nd in nodes) / len(nodes)
    kept = [nd for nd in nodes if nd.verdict.confidence > mean] or list(nodes)
    voters = [nd for nd in kept if nd.verdict.parsed_choice is not None]
    if not voters:
        voters = [nd for nd in nodes if nd.verdict.parsed_choice is not None]

    if voters:
        votes = Counter(nd.verdict.parsed_choice for nd in voters)
        top_conf: dict[str, float] = {}
        first_seen: dict[str, int] = {}
        for nd in voters:
            c = nd.verdict.parsed_choice
            top_conf[c] = max(top_conf.get(c, 0.0), nd.verdict.confidence)
            first_seen.setdefault(c, nd.id)
        winner = max(votes, key=lambda c: (votes[c], top_conf[c], -first_seen[c]))
        chosen = run.best(nd for nd in voters if nd.verdict.parsed_choice == winner)
    else:
        winner = None
        chosen = max(nodes, key=lambda nd: (nd.verdict.confidence, -nd.id))
    run.trace.log("vote", winner=winner, kept=[nd.id for nd in kept], mean=_r(mean))
    return run.finish(chosen, StopReason.BUDGET_EXHAUSTED, "vote")


def run_sequential_ts(video: VideoSource, query: Query, backend: Backend, config: SearchConfig) -> SearchResult:
    """Sequential zoom-in: one proposed sub-interval per step.

    Stops as soon as a verdict's confidence exceeds ``c1``; verdicts above
    ``c2`` add keyframe notes. When the model proposes nothing usable the
    search zooms into the centred half of the current interval. After ``k``
    steps the latest verdict is returned.
    """
    run = _Run("ts", video, query, backend, config)
    _, current = _start_root(run)
    if current.verdict.confidence > config.c1:
        return run.finish(current, StopReason.CONFIDENCE_EXCEEDED_C1, "early")

    for _ in range(config.k):
        sample = run.sample(current.interval)
        try:
            proposals = run.propose(sample, current.interval, 1)
        except BackendError as exc:
            run.trace.log("error", stage="propose", node=current.id, message=str(exc))
            proposals = []
        run.trace.log("propose", node=current.id, intervals=[iv.as_list() for iv in proposals])
        if proposals:
            interval, origin = proposals[0], NodeOrigin.HEURISTIC
        else:
            interval, origin = _centered_half(current.interval), NodeOrigin.UNIFORM_SPLIT
            run.trace.log("fallback", node=current.id, interval=interval.as_list())

        sample = run.sample(interval)
        try:
            verdict = run.answer(sample, run.memory)
        except BackendError as exc:
            return run.abort("answer", None, exc)
        current.status = NodeStatus.EXPANDED
        current = run.add_node(interval, verdict, current, origin)
        run.log_answer(current)

        if verdict.confidence > config.c1:
            return run.finish(current, StopReason.CONFIDENCE_EXCEEDED_C1, "early")
        if verdict.confidence > config.c2:
            run.describe(current, sample)

    best = run.best(run.nodes)
    if best is not current:
        run.trace.log("best_so_far", node=best.id, value=_r(best.value))
    return run.finish(current, StopReason.BUDGET_EXHAUSTED, "latest")


def run_ts_bfs(video: VideoSource, query: Query, backend: Backend, config: SearchConfig) -> SearchResult:
    """Best-first tree search over temporal intervals.

    Each node is scored by ``w_conf * confidence + w_eval * self_eval``. The
    best frontier node is expanded into at most ``n`` children drawn from
    the model's proposals and a uniform split; children are answered and
    self-evaluated as a batch, then merged in order. A child above ``c1``
    ends the search; one above ``c2`` contributes keyframe notes. After
    ``k`` expansions the best node under ``config.final_selection`` wins.
    """
    run = _Run("ts-bfs", video, query, backend, config)
    frontier: Frontier[SearchNode] = Frontier()

    sample, root = _start_root(run)
    score, eval_error = _safe_evaluate(run, sample, root.verdict, run.memory)
    root.verdict = root.verdict.with_self_eval(score)
    root.value = node_value(root.verdict.confidence, score, config.w_conf, config.w_eval)
    _log_eval(run, root, eval_error)
    frontier.push(root, root.value)
    run.trace.log("push", node=root.id, parent=None, value=_r(root.value))
    if root.verdict.confidence > config.c1:
        return run.finish(root, StopReason.CONFIDENCE_EXCEEDED_C1, "early")

    for _ in range(config.k):
        if not frontier:
            break
        node = frontier.pop()
        node.status = NodeStatus.EXPANDED
        run.trace.log("pop", node=node.id, value=_r(node.value))

        sample = run.sample(node.interval)
        try:
            heuristic = run.propose(sample, node.interval, config.n)
        except BackendError as exc:
            run.trace.log("error", stage="propose", node=node.id, message=str(exc))
            heuristic = []
        run.trace.log("propose", node=node.id, intervals=[iv.as_list() for iv in heuristic])

        ancestors = run.lineage(node)

        def fresh(iv: Interval) -> bool:
            return all(interval_iou(iv, a) <= config.visited_iou for a in ancestors)

        heuristic = [iv for iv in heuristic if fresh(iv)]
        uniform = [iv for iv in uniform_split(node.interval, config.n) if fresh(iv)]
        chosen = select_candidates(
            heuristic, uniform, config.n, node.interval, config.min_len, run.rng, config.dedup_iou
        )
        chosen = [iv for iv in chosen if fresh(iv)]
        heuristic_set = set(heuristic)
        origins = [NodeOrigin.HEURISTIC if iv in heuristic_set else NodeOrigin.UNIFORM_SPLIT for iv in chosen]
        run.trace.log(
            "expand",
            node=node.id,
            children=[{"interval": iv.as_list(), "origin": o.value} for iv, o in zip(chosen, origins)],
        )

        snapshot = run.memory

        def work(interval: Interval) -> _ChildOutcome:
            out = _ChildOutcome(run.sample(interval))
            try:
                out.verdict = run.answer(out.sample, snapshot)
            except BackendError as exc:
                out.answer_error = exc
                return out
            out.score, out.eval_error = _safe_evaluate(run, out.sample, out.verdict, snapshot)
            return out

        outcomes = run.map(work, chosen)
        for interval, origin, out in zip(chosen, origins, outcomes):
            if out.answer_error is not None:
                return run.abort("answer", None, out.answer_error)
            child = run.add_node(interval, out.verdict.with_self_eval(out.score), node, origin)
            run.log_answer(child)
            _log_eval(run, child, out.eval_error)
            frontier.push(child, child.value)
            run.trace.log("push", node=child.id, parent=node.id, value=_r(child.value))
            if child.verdict.confidence > config.c1:
                return run.finish(child, StopReason.CONFIDENCE_EXCEEDED_C1, "early")
            if child.verdict.confidence > config.c2:
                run.describe(child, out.sample)

    pool = run.nodes
    selection = config.final_selection
    if selection is FinalSelection.FRONTIER_ONLY and len(frontier):
        pool = frontier.items()
    return run.finish(run.best(pool), StopReason.BUDGET_EXHAUSTED, selection.value)


def _safe_evaluate(run: _Run, sample: FrameSample, verdict: ModelVerdict, memory: KeyframeMemory):
    try:
        return run.evaluate(sample, verdict, memory), None
    except BackendError as exc:
        return None, exc


def _log_eval(run: _Run, node: SearchNode, error: Optional[BackendError]) -> None:
    if error is not None:
        run.trace.log("error", stage="evaluate", node=node.id, message=str(error))
    run.trace.log("evaluate", node=node.id, self_eval=_r(node.verdict.self_eval))


STRATEGIES: dict[str, Callable[..., SearchResult]] = {
    "us": run_uniform_sampling,
    "utv": run_uniform_temporal_voting,
    "ts": run_sequential_ts,
    "ts-bfs": run_ts_bfs,
}


def run_strategy(name: str, video: VideoSource, query: Query, backend: Backend, config: SearchConfig) -> SearchResult:
    try:
        fn = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}") from None
    return fn(video, query, backend, config)
