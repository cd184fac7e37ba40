"""Trial history and agent memory regeneration."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from .agent.base import AbstractAgent, AgentRequest, Phase
from .constants import (
    DEFAULT_CONTROLLER_MODEL,
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    EMPTY_MEMORY,
)
from .exceptions import SearchError
from .logging import get_logger
from .policy.prompts import PromptTemplate, TemplateName, load_template

logger = get_logger(__name__)

MEMORY_SEPARATOR = "\n\n"


@dataclass(slots=True, frozen=True)
class TrialRecord:
    """One iteration's action, per-task validation scores and aggregate."""

    step: int
    action_type: str
    bindings: tuple[str, ...]
    labels: tuple[str, ...]
    scores: tuple[tuple[str, float], ...]
    aggregate: float
    produced_label: str
    produced_id: str
    fallback: bool = False

    @property
    def score_map(self) -> dict[str, float]:
        return dict(self.scores)

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "action_type": self.action_type,
            "bindings": list(self.bindings),
            "labels": list(self.labels),
            "scores": {task: value for task, value in self.scores},
            "aggregate": self.aggregate,
            "produced_label": self.produced_label,
            "produced_id": self.produced_id,
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TrialRecord:
        try:
            return cls(
                step=int(data["step"]),
                action_type=str(data["action_type"]),
                bindings=tuple(str(b) for b in data["bindings"]),
                labels=tuple(str(lbl) for lbl in data["labels"]),
                scores=tuple((str(k), float(v)) for k, v in data["scores"].items()),
                aggregate=float(data["aggregate"]),
                produced_label=str(data["produced_label"]),
                produced_id=str(data["produced_id"]),
                fallback=bool(data.get("fallback", False)),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise SearchError(f"Malformed trial record: {e}") from e


class TrialHistory:
    """Append-only sequence of trial records with contiguous steps from 1."""

    def __init__(self, records: Iterable[TrialRecord] = ()) -> None:
        self._records: list[TrialRecord] = []
        for record in records:
            self.append(record)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TrialRecord]:
        return iter(self._records)

    def __getitem__(self, index: int) -> TrialRecord:
        return self._records[index]

    @property
    def records(self) -> tuple[TrialRecord, ...]:
        return tuple(self._records)

    def append(self, record: TrialRecord) -> None:
        expected = len(self._records) + 1
        if record.step != expected:
            raise SearchError(f"Trial step {record.step} out of order; expected {expected}")
        self._records.append(record)


@dataclass(slots=True, frozen=True)
class MemoryState:
    """Agent-written summary produced after trial ``version``."""

    text: str
    version: int
    truncated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "version": self.version, "truncated": self.truncated}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MemoryState:
        return cls(
            text=str(data["text"]),
            version=int(data["version"]),
            truncated=bool(data.get("truncated", False)),
        )


def format_trial(record: TrialRecord, *, per_task: bool = False) -> str:
    """Render one trial as a single history line."""
    line = (
        f"Step {record.step}: {record.action_type}({', '.join(record.labels)})"
        f" -> {record.produced_label}, score: {record.aggregate:.3f}"
    )
    if per_task and record.scores:
        detail = ", ".join(f"{task}: {value:.3f}" for task, value in record.scores)
        line += f" ({detail})"
    return line


def format_history(records: Sequence[TrialRecord], *, per_task: bool = False) -> str:
    """Render trials one per line in step order; empty input gives ""."""
    return "\n".join(format_trial(r, per_task=per_task) for r in records)


def memory_prompt(
    prev_records: Sequence[TrialRecord],
    prev_memories: Sequence[MemoryState],
    new_records: Sequence[TrialRecord],
    *,
    memory_cap: int | None = None,
    per_task: bool = False,
    template: PromptTemplate | None = None,
) -> tuple[str, bool]:
    """Render the memory-update prompt.

    Returns:
        The prompt, and whether older memories were dropped by ``memory_cap``
    """
    memories = list(prev_memories)
    truncated = False
    if memory_cap is not None and len(memories) > memory_cap:
        memories = memories[len(memories) - memory_cap :] if memory_cap > 0 else []
        truncated = True

    template = template or load_template(TemplateName.MEMORY_UPDATE)
    prompt = template.render(
        {
            "<previous results>": format_history(prev_records, per_task=per_task)
            or EMPTY_MEMORY,
            "<previous memories>": MEMORY_SEPARATOR.join(m.text for m in memories)
            or EMPTY_MEMORY,
            "<new results>": format_history(new_records, per_task=per_task),
        }
    )
    return prompt, truncated


def update_memory(
    agent: AbstractAgent,
    prev_records: Sequence[TrialRecord],
    prev_memories: Sequence[MemoryState],
    new_records: Sequence[TrialRecord],
    *,
    model: str = DEFAULT_CONTROLLER_MODEL,
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    memory_cap: int | None = None,
    per_task: bool = False,
    template: PromptTemplate | None = None,
) -> MemoryState:
    """Ask the agent for a new memory from past and latest trials.

    Args:
        agent: Agent to complete the prompt
        prev_records: Trials before this iteration
        prev_memories: Earlier memory texts, oldest first
        new_records: The latest trial(s); must be nonempty
        model: Agent model name
        temperature: Decoding temperature
        max_tokens: Output cap
        memory_cap: Keep only the last K previous memories
        per_task: Append per-task scores to each history line
        template: Override of the shipped template

    Returns:
        The agent's full output as the new memory
    """
    if not new_records:
        raise ValueError("update_memory needs at least one new trial")

    prompt, truncated = memory_prompt(
        prev_records,
        prev_memories,
        new_records,
        memory_cap=memory_cap,
        per_task=per_task,
        template=template,
    )
    if truncated:
        logger.warning(
            "Memory prompt keeps last %d of %d memories", memory_cap, len(prev_memories)
        )

    version = new_records[-1].step
    text = agent.complete(
        AgentRequest(
            prompt=prompt,
            phase=Phase.MEMORY_UPDATE,
            iteration=version,
            model=model,
            temperature=temperature,
            max_tokens=max_tokens,
        )
    )
    return MemoryState(text=text, version=version, truncated=truncated)
