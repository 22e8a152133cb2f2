"""The model contract used by every search strategy."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

from ..domain import Interval, KeyframeMemory, KeyframeNote, ModelVerdict, Query, VideoSource, compute_confidence
from ..errors import BackendError, ProtocolError
from ..frames import EncodedFrame, FrameStore
from ..prompts import PromptSet, build_context, parse_choice, parse_intervals
from ..sampling import FrameSample

logger = logging.getLogger(__name__)

NEUTRAL_EVAL = 0.5


@dataclass(frozen=True)
class BackendCapabilities:
    supports_logprobs: bool = True
    supports_yes_probability: bool = True
    max_images: int = 64


class Backend(ABC):
    """A video-language model exposing the four calls the searches need.

    Implementations must be safe to call from several threads at once.
    """

    capabilities = BackendCapabilities()

    @abstractmethod
    def answer(
        self, video: VideoSource, sample: FrameSample, query: Query, memory: KeyframeMemory
    ) -> ModelVerdict:
        """Answer ``query`` from the sampled frames; ``self_eval`` is left unset."""

    @abstractmethod
    def evaluate(
        self,
        video: VideoSource,
        sample: FrameSample,
        query: Query,
        verdict: ModelVerdict,
        memory: KeyframeMemory,
    ) -> float:
        """Probability in [0, 1] that ``verdict`` is correct, judged by the model."""

    @abstractmethod
    def propose(
        self,
        video: VideoSource,
        sample: FrameSample,
        query: Query,
        memory: KeyframeMemory,
        parent: Interval,
        n: int,
    ) -> list[Interval]:
        """Up to ``n`` sub-intervals of ``parent`` likely to hold the answer."""

    @abstractmethod
    def describe(
        self, video: VideoSource, sample: FrameSample, query: Query, memory: KeyframeMemory
    ) -> list[KeyframeNote]:
        """Keyframe notes for the sampled frames (possibly none)."""


@dataclass(frozen=True)
class TokenLogprob:
    token: str
    logprob: float
    top_logprobs: Optional[tuple[tuple[str, float], ...]] = None


@dataclass(frozen=True)
class Completion:
    text: str
    tokens: Optional[tuple[TokenLogprob, ...]] = None  # None when the server sent no logprobs


@dataclass(frozen=True)
class InferenceRequest:
    kind: str
    interval: Interval
    frames: tuple[EncodedFrame, ...]
    system_text: str
    user_text: str
    max_tokens: int
    want_logprobs: bool
    temperature: float = 0.0
    top_logprobs: int = 5
    extra: dict = field(default_factory=dict, compare=False)


def yes_probability(completion: Completion) -> Optional[float]:
    """Share of probability on "yes" versus "no" at the first generated token.

    With a top-logprob list the two masses are renormalized against each
    other; with only the sampled token known, the other answer gets the rest.
    Returns ``None`` when neither answer is visible.
    """
    if not completion.tokens:
        return None
    first = completion.tokens[0]
    if first.top_logprobs:
        p_yes = p_no = 0.0
        for token, lp in first.top_logprobs:
            word = token.strip().lower()
            if word == "yes":
                p_yes += math.exp(lp)
            elif word == "no":
                p_no += math.exp(lp)
        if p_yes + p_no == 0.0:
            return None
        return p_yes / (p_yes + p_no)
    word = first.token.strip().lower()
    p = math.exp(first.logprob)
    if word == "yes":
        return p
    if word == "no":
        return 1.0 - p
    return None


class ChatBackend(Backend):
    """Backend built on a text-completion primitive with per-token log-probs.

    Subclasses implement :meth:`complete`; prompt rendering, frame resolution
    and reply parsing live here so every chat-style backend shares them.
    """

    def __init__(
        self,
        prompts: Optional[PromptSet] = None,
        frame_store: Optional[FrameStore] = None,
        answer_max_tokens: int = 16,
        text_max_tokens: int = 256,
        capabilities: Optional[BackendCapabilities] = None,
    ):
        self.prompts = prompts or PromptSet.load()
        self.frame_store = frame_store or FrameStore("synthetic")
        self.answer_max_tokens = answer_max_tokens
        self.text_max_tokens = text_max_tokens
        if capabilities is not None:
            self.capabilities = capabilities

    @abstractmethod
    def complete(self, request: InferenceRequest) -> Completion:
        """Run one inference call."""

    def _request(
        self,
        kind: str,
        video: VideoSource,
        sample: FrameSample,
        query: Query,
        memory: Optional[KeyframeMemory],
        max_tokens: int,
        want_logprobs: bool,
        **context,
    ) -> InferenceRequest:
        if sample.n_f > self.capabilities.max_images:
            raise BackendError(f"{sample.n_f} frames exceed the backend limit of {self.capabilities.max_images}", retriable=False)
        frames = tuple(self.frame_store.resolve(video, sample.indices))
        ctx = build_context(query, sample.interval, video.fps, video.total_frames, memory, **context)
        return InferenceRequest(
            kind=kind,
            interval=sample.interval,
            frames=frames,
            system_text=self.prompts.system_text,
            user_text=self.prompts.get(kind).render(**ctx),
            max_tokens=max_tokens,
            want_logprobs=want_logprobs,
        )

    def answer(self, video, sample, query, memory):
        request = self._request("answer", video, sample, query, memory, self.answer_max_tokens, True)
        completion = self.complete(request)
        if completion.tokens is None:
            if self.capabilities.supports_logprobs:
                raise ProtocolError("server omitted log-probabilities on an answer call")
            raise BackendError("backend cannot report log-probabilities", retriable=False)
        if not completion.tokens:
            raise ProtocolError("no generated tokens")
        if any(t.logprob > 1e-6 for t in completion.tokens):
            raise ProtocolError("server sent a positive log-probability")
        # tiny positive values are float noise around log(1)
        logprobs = [min(0.0, t.logprob) for t in completion.tokens]
        text = completion.text.strip()
        return ModelVerdict(text, parse_choice(text, query.options), tuple(logprobs), compute_confidence(logprobs))

    def evaluate(self, video, sample, query, verdict, memory):
        request = self._request(
            "evaluate", video, sample, query, memory, 1, True, prior_answer=verdict.answer_text
        )
        score = yes_probability(self.complete(request))
        if score is None:
            logger.warning("no yes/no token in evaluation reply for %s; using %.1f", sample.interval, NEUTRAL_EVAL)
            return NEUTRAL_EVAL
        return min(1.0, max(0.0, score))

    def propose(self, video, sample, query, memory, parent, n):
        request = self._request("expand", video, sample, query, memory, self.text_max_tokens, False, n=n)
        completion = self.complete(request)
        return parse_intervals(completion.text, video.fps, parent)[:n]

    def describe(self, video, sample, query, memory):
        request = self._request("keyinfo", video, sample, query, memory, self.text_max_tokens, False)
        text = self.complete(request).text.strip()
        if not text:
            return []
        return [KeyframeNote(sample.interval.midpoint / video.fps, sample.interval, text)]
