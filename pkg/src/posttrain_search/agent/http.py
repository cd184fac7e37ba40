"""Chat-completions agent over HTTP."""

from __future__ import annotations

import os
from collections.abc import Callable
from typing import Any

import httpx

from ..constants import DEFAULT_API_KEY_ENV, DEFAULT_REQUEST_TIMEOUT
from ..exceptions import AgentError, AgentTransportError
from .base import AgentRequest, BaseAgent
from .trace import AgentTrace


class ChatCompletionsAgent(BaseAgent):
    """Agent backed by a chat-completions style JSON endpoint.

    Each request carries one user message holding the rendered prompt; the
    first choice's message content is returned. The credential is read from
    the environment variable named by ``api_key_env``.
    """

    def __init__(
        self,
        url: str,
        *,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = DEFAULT_REQUEST_TIMEOUT,
        client: httpx.Client | None = None,
        trace: AgentTrace | None = None,
        sleep: Callable[[float], None] | None = None,
        **kwargs: Any,
    ) -> None:
        """Initialize HTTP agent.

        Args:
            url: Full chat-completions URL
            api_key_env: Environment variable holding the bearer token
            timeout: Per-request timeout in seconds
            client: Preconfigured httpx client (tests)
            trace: Trace to append to
            sleep: Backoff delay function
            **kwargs: Passed to BaseAgent (max_attempts, backoff_base)
        """
        if sleep is not None:
            kwargs["sleep"] = sleep
        super().__init__(trace=trace, **kwargs)
        if not url:
            raise AgentError("Agent endpoint URL is empty")
        self.url = url
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._owns_client = client is None
        self._client = client if client is not None else httpx.Client(timeout=timeout)

    def __enter__(self) -> ChatCompletionsAgent:
        return self

    def __exit__(self, exc_type: object, exc_val: object, exc_tb: object) -> None:
        self.close()

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def _complete_impl(self, request: AgentRequest) -> str:
        body = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            resp = self._client.post(
                self.url, json=body, headers=self._headers(), timeout=self.timeout
            )
            resp.raise_for_status()
        except httpx.HTTPStatusError as e:
            raise AgentTransportError(
                f"Endpoint returned status {e.response.status_code}"
            ) from e
        except httpx.HTTPError as e:
            raise AgentTransportError(f"Endpoint unreachable: {e}") from e

        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise AgentError(f"Malformed chat-completions response: {e}") from e
        if not isinstance(text, str):
            raise AgentError("Chat-completions response content is not text")
        return text
