"""Deterministic scripted agent."""

from __future__ import annotations

import re
from collections.abc import Callable, Mapping, Sequence
from pathlib import Path
from typing import Any

from ..exceptions import AgentError, ScriptExhaustedError
from .base import AgentRequest, BaseAgent, Phase
from .trace import AgentTrace

SCRIPT_HEADER = re.compile(r"^###\s*(\S+)\s*$")

Responder = Callable[[AgentRequest, int], str]


def parse_script(text: str) -> dict[Phase, list[str]]:
    """Split a script into per-phase response lists.

    Responses are delimited by ``### <phase>`` header lines; the body of each
    block, with surrounding blank lines removed, is one response.
    """
    responses: dict[Phase, list[str]] = {phase: [] for phase in Phase}
    current: Phase | None = None
    body: list[str] = []

    def flush() -> None:
        if current is not None:
            responses[current].append("\n".join(body).strip("\n"))

    for lineno, line in enumerate(text.splitlines(), start=1):
        match = SCRIPT_HEADER.match(line)
        if match is None:
            if current is None and line.strip():
                raise AgentError(f"Script line {lineno} precedes any phase header")
            body.append(line)
            continue
        flush()
        try:
            current = Phase(match.group(1))
        except ValueError:
            raise AgentError(
                f"Unknown phase {match.group(1)!r} at script line {lineno}"
            ) from None
        body = []
    flush()
    return responses


def load_script(path: str | Path) -> dict[Phase, list[str]]:
    """Load a script file of delimited responses."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise AgentError(f"Cannot read agent script {path}: {e}") from e
    return parse_script(text)


class ScriptedAgent(BaseAgent):
    """Agent answering from fixed per-phase tables or a responder callable.

    Output is a pure function of (phase, per-phase call index), so replays are
    byte-identical.
    """

    def __init__(
        self,
        responses: Mapping[Phase | str, Sequence[str]] | None = None,
        *,
        responder: Responder | None = None,
        trace: AgentTrace | None = None,
    ) -> None:
        super().__init__(max_attempts=1, trace=trace)
        if (responses is None) == (responder is None):
            raise AgentError("Scripted agent needs exactly one of responses or responder")
        self._responses: dict[Phase, list[str]] = {}
        if responses is not None:
            for phase, items in responses.items():
                self._responses[Phase(phase)] = list(items)
        self._responder = responder
        self._cursor: dict[Phase, int] = {phase: 0 for phase in Phase}

    @classmethod
    def from_file(cls, path: str | Path, **kwargs: Any) -> ScriptedAgent:
        return cls(load_script(path), **kwargs)

    def _complete_impl(self, request: AgentRequest) -> str:
        index = self._cursor[request.phase]
        if self._responder is not None:
            text = self._responder(request, index)
        else:
            items = self._responses.get(request.phase, [])
            if index >= len(items):
                raise ScriptExhaustedError(
                    f"script exhausted at iteration {request.iteration}"
                )
            text = items[index]
        self._cursor[request.phase] = index + 1
        return text

    def cursor(self) -> dict[str, int]:
        """Per-phase call counts, for checkpoints."""
        return {str(phase): n for phase, n in self._cursor.items()}

    def restore_cursor(self, cursor: Mapping[str, int]) -> None:
        for phase, n in cursor.items():
            self._cursor[Phase(phase)] = int(n)
