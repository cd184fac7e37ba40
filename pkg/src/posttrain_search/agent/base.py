"""Abstract agent interface and retrying base class."""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
from typing import Protocol

from ..constants import (
    DEFAULT_BACKOFF_BASE,
    DEFAULT_CONTROLLER_MODEL,
    DEFAULT_MAX_ATTEMPTS,
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
)
from ..exceptions import AgentError, AgentTransportError
from ..logging import get_logger, log_prompt, log_reply
from .trace import AgentCall, AgentTrace


class Phase(StrEnum):
    """Agent call phases within one iteration."""

    TYPE_SELECTION = "type-selection"
    OBJECT_SELECTION = "object-selection"
    MEMORY_UPDATE = "memory-update"


@dataclass(slots=True, frozen=True)
class AgentRequest:
    """A single-message completion request."""

    prompt: str
    phase: Phase
    iteration: int
    model: str = DEFAULT_CONTROLLER_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    retry: bool = False

    def __post_init__(self) -> None:
        if not self.prompt:
            raise AgentError("Agent prompt must be nonempty")
        if self.temperature < 0:
            raise AgentError(f"Temperature must be >= 0, got {self.temperature}")
        if self.max_tokens <= 0:
            raise AgentError(f"max_tokens must be positive, got {self.max_tokens}")


class AbstractAgent(Protocol):
    """Agent protocol used by selection policies and memory updates."""

    trace: AgentTrace

    def complete(self, request: AgentRequest) -> str:
        """Return the generated text for a request.

        Args:
            request: Prompt, phase and decoding settings

        Returns:
            Generated text, verbatim
        """
        ...


class BaseAgent(ABC):
    """Base agent with bounded exponential-backoff retries and tracing."""

    def __init__(
        self,
        *,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base: float = DEFAULT_BACKOFF_BASE,
        trace: AgentTrace | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        """Initialize base agent.

        Args:
            max_attempts: Total attempts per request on transport failure (default: 3)
            backoff_base: First retry delay in seconds, doubled per attempt
            trace: Trace to append to (a fresh one by default)
            sleep: Delay function, replaceable in tests
        """
        if max_attempts < 1:
            raise AgentError(f"max_attempts must be >= 1, got {max_attempts}")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.trace = trace if trace is not None else AgentTrace()
        self._sleep = sleep
        self._logger = get_logger(__name__)

    @abstractmethod
    def _complete_impl(self, request: AgentRequest) -> str:
        """Implementation-specific completion.

        Raises:
            AgentTransportError: On failures worth retrying
        """
        ...

    def complete(self, request: AgentRequest) -> str:
        """Complete a request, retrying transport failures, and trace the result.

        Args:
            request: Request to send

        Returns:
            Generated text

        Raises:
            AgentError: After the last failed attempt, or on non-retryable failure
        """
        log_prompt(self._logger, request.phase, request.prompt)
        last_error: AgentTransportError | None = None

        for attempt in range(self.max_attempts):
            started = time.perf_counter()
            try:
                text = self._complete_impl(request)
            except AgentTransportError as e:
                last_error = e
                if attempt + 1 < self.max_attempts:
                    delay = self.backoff_base * (2**attempt)
                    self._logger.warning(
                        "Agent request failed (%s), retrying (%d/%d) in %.2fs",
                        e,
                        attempt + 1,
                        self.max_attempts - 1,
                        delay,
                    )
                    self._sleep(delay)
                continue

            latency = time.perf_counter() - started
            self.trace.append(
                AgentCall(
                    iteration=request.iteration,
                    phase=str(request.phase),
                    prompt=request.prompt,
                    response=text,
                    latency=latency,
                    model=request.model,
                    retry=request.retry,
                )
            )
            log_reply(self._logger, request.phase, text, latency)
            return text

        assert last_error is not None
        raise AgentError(
            f"Agent request failed after {self.max_attempts} attempts: {last_error}"
        ) from last_error
