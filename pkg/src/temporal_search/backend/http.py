"""Client for OpenAI-compatible chat-completions servers with log-probabilities."""

from __future__ import annotations

import logging
import os
import time
from typing import Any, Optional

import httpx

from ..errors import BackendError, ProtocolError
from .base import ChatBackend, Completion, InferenceRequest, TokenLogprob

logger = logging.getLogger(__name__)

API_KEY_ENV = "TEMPORAL_SEARCH_API_KEY"


def build_chat_body(request: InferenceRequest, model: str) -> dict[str, Any]:
    content: list[dict[str, Any]] = []
    for frame in request.frames:
        content.append({"type": "text", "text": f"[t={frame.timestamp:.1f}s]"})
        content.append({"type": "image_url", "image_url": {"url": frame.data_url}})
    content.append({"type": "text", "text": request.user_text})
    body: dict[str, Any] = {
        "model": model,
        "messages": [
            {"role": "system", "content": request.system_text},
            {"role": "user", "content": content},
        ],
        "max_tokens": request.max_tokens,
        "temperature": request.temperature,
    }
    if request.want_logprobs:
        body["logprobs"] = True
        body["top_logprobs"] = request.top_logprobs
    return body


def parse_chat_response(data: Any) -> Completion:
    """Turn a chat-completions JSON body into a :class:`Completion`.

    ``top_logprobs`` may be missing or empty; ``logprobs`` may be absent
    altogether, in which case ``tokens`` is ``None``.
    """
    try:
        choice = data["choices"][0]
        message = choice.get("message") or {}
        text = message.get("content") or ""
        if isinstance(text, list):
            text = "".join(part.get("text", "") for part in text if isinstance(part, dict))
        logprobs = choice.get("logprobs") or {}
        content = logprobs.get("content")
        if content is None:
            return Completion(text, None)
        tokens = []
        for entry in content:
            top = entry.get("top_logprobs") or None
            if top is not None:
                top = tuple((t["token"], float(t["logprob"])) for t in top)
            tokens.append(TokenLogprob(entry["token"], float(entry["logprob"]), top))
        return Completion(text, tuple(tokens))
    except (KeyError, IndexError, TypeError, ValueError, AttributeError) as exc:
        raise ProtocolError(f"malformed chat-completions response: {exc!r}") from exc


class HttpBackend(ChatBackend):
    """Talks to ``POST {base_url}/chat/completions``.

    Transport failures and 5xx responses are retried with exponential
    backoff, up to ``max_attempts`` attempts in total; 4xx responses are
    raised at once. Confidence is always recomputed from the returned token
    log-probabilities.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
        client: Optional[httpx.Client] = None,
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.max_attempts = max_attempts
        self.backoff = backoff
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)
        self.attempts = 0

    def close(self) -> None:
        self._client.close()

    def complete(self, request: InferenceRequest) -> Completion:
        body = build_chat_body(request, self.model)
        last_error: Optional[BackendError] = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            self.attempts += 1
            try:
                response = self._client.post(self.url, json=body)
            except httpx.TransportError as exc:
                last_error = BackendError(f"transport error: {exc!r}", retriable=True)
                logger.warning("attempt %d/%d failed: %s", attempt + 1, self.max_attempts, last_error)
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"server error {response.status_code}", retriable=True, status=response.status_code)
                logger.warning("attempt %d/%d failed: %s", attempt + 1, self.max_attempts, last_error)
                continue
            if response.status_code >= 400:
                raise BackendError(
                    f"request rejected with {response.status_code}: {response.text[:200]}",
                    retriable=False,
                    status=response.status_code,
                )
            try:
                data = response.json()
            except ValueError as exc:
                raise ProtocolError(f"response is not JSON: {exc}") from exc
            return parse_chat_response(data)
        raise last_error
