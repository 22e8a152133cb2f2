from .base import (
    NEUTRAL_EVAL,
    Backend,
    BackendCapabilities,
    ChatBackend,
    Completion,
    InferenceRequest,
    TokenLogprob,
    yes_probability,
)
from .http import HttpBackend, build_chat_body, parse_chat_response
from .stub import StubBackend, StubReply, answer_reply, eval_reply

__all__ = [
    "NEUTRAL_EVAL",
    "Backend",
    "BackendCapabilities",
    "ChatBackend",
    "Completion",
    "HttpBackend",
    "InferenceRequest",
    "StubBackend",
    "StubReply",
    "TokenLogprob",
    "answer_reply",
    "build_chat_body",
    "eval_reply",
    "parse_chat_response",
    "yes_probability",
]
