"""Scripted backend for trace and contract tests."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

from ..domain import Interval
from .base import ChatBackend, Completion, InferenceRequest, TokenLogprob


@dataclass(frozen=True)
class StubReply:
    """What the stub "generates": text plus optional token and top-token probabilities.

    ``probs`` holds one probability per generated token. ``top`` maps
    candidate tokens to probabilities at the first position.
    """

    text: str
    probs: Optional[Sequence[float]] = None
    top: Optional[Mapping[str, float]] = None

    def to_completion(self) -> Completion:
        if self.probs is None and self.top is None:
            return Completion(self.text, None)
        probs = list(self.probs) if self.probs is not None else [max(self.top.values())]
        pieces = self.text.split() if len(probs) > 1 else [self.text]
        tokens = []
        for i, p in enumerate(probs):
            token = pieces[i] if i < len(pieces) else ""
            top = None
            if i == 0 and self.top is not None:
                top = tuple((tok, _log(q)) for tok, q in self.top.items())
            tokens.append(TokenLogprob(token, _log(p), top))
        return Completion(self.text, tuple(tokens))


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def answer_reply(text: str, *probs: float) -> StubReply:
    return StubReply(text, probs or (1.0,))


def eval_reply(p_yes: float) -> StubReply:
    return StubReply("yes" if p_yes >= 0.5 else "no", top={"yes": p_yes, "no": 1.0 - p_yes})


Rule = Union[StubReply, str, Sequence, Mapping, Callable[[InferenceRequest], StubReply]]


class StubBackend(ChatBackend):
    """Answers each call kind (``answer``, ``evaluate``, ``expand``, ``keyinfo``) by rule.

    A rule is one of:

    * a :class:`StubReply` or plain string, returned for every call;
    * a list, consumed one item per call (a shared, locked cursor);
    * a mapping from ``(start, end)`` frame tuples to replies, with an
      optional ``None`` key as the default;
    * a callable taking the :class:`InferenceRequest`.

    Mapping and callable rules depend only on the request, so runs stay
    deterministic when calls are issued concurrently; list rules do not.
    """

    def __init__(self, answer: Rule = "A", evaluate: Rule = "", expand: Rule = "", keyinfo: Rule = "", **kwargs):
        super().__init__(**kwargs)
        self.rules = {"answer": answer, "evaluate": evaluate, "expand": expand, "keyinfo": keyinfo}
        self._cursors = {kind: 0 for kind in self.rules}
        self._lock = threading.Lock()
        self.calls: list[tuple[str, Interval]] = []
        self.requests: list[InferenceRequest] = []

    def complete(self, request: InferenceRequest) -> Completion:
        with self._lock:
            self.calls.append((request.kind, request.interval))
            self.requests.append(request)
            reply = self._lookup(request)
        if isinstance(reply, str):
            reply = StubReply(reply, (1.0,)) if request.want_logprobs and reply else StubReply(reply)
        return reply.to_completion()

    def _lookup(self, request: InferenceRequest):
        rule = self.rules[request.kind]
        if isinstance(rule, (StubReply, str)):
            return rule
        if isinstance(rule, Mapping):
            key = (request.interval.start, request.interval.end)
            if key in rule:
                return rule[key]
            if None in rule:
                return rule[None]
            raise KeyError(f"no {request.kind} reply scripted for {request.interval}")
        if callable(rule):
            return rule(request)
        i = self._cursors[request.kind]
        if i >= len(rule):
            raise IndexError(f"{request.kind} script exhausted after {i} calls")
        self._cursors[request.kind] = i + 1
        return rule[i]

    def count(self, kind: str) -> int:
        return sum(1 for k, _ in self.calls if k == kind)
