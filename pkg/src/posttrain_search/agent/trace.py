"""Append-only record of every agent call."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import Any

from ..exceptions import AgentError


@dataclass(slots=True, frozen=True)
class AgentCall:
    """One completed agent round-trip."""

    iteration: int
    phase: str
    prompt: str
    response: str
    latency: float
    model: str
    retry: bool = False

    def to_dict(self, *, include_latency: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            "iteration": self.iteration,
            "phase": self.phase,
            "model": self.model,
            "retry": self.retry,
            "prompt": self.prompt,
            "response": self.response,
        }
        if include_latency:
            data["latency"] = self.latency
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AgentCall:
        try:
            return cls(
                iteration=int(data["iteration"]),
                phase=str(data["phase"]),
                prompt=str(data["prompt"]),
                response=str(data["response"]),
                latency=float(data.get("latency", 0.0)),
                model=str(data.get("model", "")),
                retry=bool(data.get("retry", False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise AgentError(f"Malformed agent call record: {e}") from e


class AgentTrace:
    """Ordered agent calls; entries are only ever appended (or rolled back)."""

    def __init__(self, calls: Iterable[AgentCall] = ()) -> None:
        self._calls: list[AgentCall] = list(calls)

    def __len__(self) -> int:
        return len(self._calls)

    def __iter__(self) -> Iterator[AgentCall]:
        return iter(self._calls)

    def __getitem__(self, index: int) -> AgentCall:
        return self._calls[index]

    def append(self, call: AgentCall) -> None:
        self._calls.append(call)

    def since(self, offset: int) -> list[AgentCall]:
        """Calls recorded after the first ``offset`` entries."""
        return self._calls[offset:]

    def truncate(self, length: int) -> None:
        """Drop calls past ``length``; used to roll back an aborted iteration."""
        del self._calls[length:]

    def for_iteration(self, iteration: int) -> list[AgentCall]:
        return [c for c in self._calls if c.iteration == iteration]

    def to_dicts(self, *, include_latency: bool = True) -> list[dict[str, Any]]:
        return [c.to_dict(include_latency=include_latency) for c in self._calls]

    @classmethod
    def from_dicts(cls, records: Iterable[Mapping[str, Any]]) -> AgentTrace:
        return cls(AgentCall.from_dict(r) for r in records)
