"""Selection policies: two-stage agent protocol, uniform random, scripted."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np

from ..actions import ActionCandidate, ActionSchema, enumerate_candidates
from ..agent.base import AbstractAgent, AgentRequest, Phase
from ..constants import (
    DEFAULT_CONTROLLER_MODEL,
    DEFAULT_MAX_TOKENS,
    DEFAULT_PARSE_RETRIES,
    DEFAULT_TEMPERATURE,
    RANDOM_CONTROLLER,
    SCRIPTED_CONTROLLER,
)
from ..exceptions import SelectionError, SelectionParseError
from ..logging import get_logger
from ..registry import ObjectEntry
from .parsing import parse_object_selection, parse_type_selection
from .prompts import PromptTemplate, render_object_prompt, render_type_prompt

logger = get_logger(__name__)

Pool = Mapping[str, Sequence[ObjectEntry]]


@dataclass(slots=True, frozen=True)
class SelectionTrace:
    """How an action was chosen: indices as presented, raw texts, retries."""

    policy: str
    type_index: int
    object_indices: tuple[int, ...]
    candidate_count: int
    raw_texts: tuple[str, ...] = ()
    retries: int = 0
    fallback: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "policy": self.policy,
            "type_index": self.type_index,
            "object_indices": list(self.object_indices),
            "candidate_count": self.candidate_count,
            "raw_texts": list(self.raw_texts),
            "retries": self.retries,
            "fallback": self.fallback,
        }


@dataclass(slots=True)
class SelectionContext:
    """Everything a policy sees at one iteration."""

    memory: str
    schemas: Sequence[ActionSchema]
    pool: Pool
    candidates: list[ActionCandidate]
    step: int
    rng: np.random.Generator
    by_type: dict[str, list[ActionCandidate]] = field(init=False)

    def __post_init__(self) -> None:
        self.by_type = {}
        for candidate in self.candidates:
            self.by_type.setdefault(candidate.schema, []).append(candidate)

    @property
    def available_types(self) -> list[ActionSchema]:
        """Schemas with at least one candidate, in declaration order."""
        return [s for s in self.schemas if s.name in self.by_type]

    def slot_entries(self, schema: ActionSchema) -> list[Sequence[ObjectEntry]]:
        return [self.pool.get(kind, ()) for kind in schema.slots]

    def indices_of(self, schema: ActionSchema, candidate: ActionCandidate) -> tuple[int, ...]:
        """Per-slot positions of a candidate's bindings in the presented lists."""
        positions = []
        for entries, object_id in zip(self.slot_entries(schema), candidate.bindings, strict=True):
            positions.append(next(i for i, e in enumerate(entries) if e.id == object_id))
        return tuple(positions)

    def resolve(self, schema: ActionSchema, bindings: Sequence[str]) -> ActionCandidate | None:
        """Match bindings to an enumerated candidate, collapsing unordered repeats."""
        allowed = {c.bindings: c for c in self.by_type.get(schema.name, [])}
        direct = allowed.get(tuple(bindings))
        if direct is not None:
            return direct
        canonical = list(bindings)
        order = {e.id: i for entries in self.slot_entries(schema) for i, e in enumerate(entries)}
        for positions in schema.repeated_kinds.values():
            ordered = sorted((canonical[p] for p in positions), key=order.__getitem__)
            for p, object_id in zip(positions, ordered, strict=True):
                canonical[p] = object_id
        return allowed.get(tuple(canonical))


class Policy(Protocol):
    """A way of choosing one action from the enumerated candidates."""

    name: str

    def select(self, context: SelectionContext) -> tuple[ActionCandidate, SelectionTrace]:
        ...


def _schema_named(context: SelectionContext, name: str) -> ActionSchema:
    for schema in context.schemas:
        if schema.name == name:
            return schema
    raise SelectionError(f"Unknown action type {name!r}")


def _uniform(context: SelectionContext, candidates: Sequence[ActionCandidate]) -> ActionCandidate:
    return candidates[int(context.rng.integers(len(candidates)))]


class RandomPolicy:
    """Uniform over the flat candidate list (not over action types first)."""

    name = RANDOM_CONTROLLER

    def select(self, context: SelectionContext) -> tuple[ActionCandidate, SelectionTrace]:
        candidate = _uniform(context, context.candidates)
        schema = _schema_named(context, candidate.schema)
        types = [s.name for s in context.available_types]
        return candidate, SelectionTrace(
            policy=self.name,
            type_index=types.index(schema.name),
            object_indices=context.indices_of(schema, candidate),
            candidate_count=len(context.candidates),
        )


class ScriptedPolicy:
    """Pops the next prescribed (action type, labels) pair."""

    name = SCRIPTED_CONTROLLER

    def __init__(self, sequence: Sequence[tuple[str, Sequence[str]]]) -> None:
        self.sequence = [(str(t), tuple(labels)) for t, labels in sequence]
        self.cursor = 0

    def select(self, context: SelectionContext) -> tuple[ActionCandidate, SelectionTrace]:
        if self.cursor >= len(self.sequence):
            raise SelectionError(f"Scripted sequence exhausted at step {context.step}")
        action_type, labels = self.sequence[self.cursor]
        schema = _schema_named(context, action_type)
        if len(labels) != len(schema.slots):
            raise SelectionError(
                f"Scripted action {action_type} expects {len(schema.slots)} labels, got {len(labels)}"
            )

        bindings = []
        for kind, label in zip(schema.slots, labels, strict=True):
            entry = next((e for e in context.pool.get(kind, ()) if e.label == label), None)
            if entry is None:
                raise SelectionError(f"Scripted label {label!r} not in pool kind {kind!r}")
            bindings.append(entry.id)

        candidate = context.resolve(schema, bindings)
        if candidate is None:
            raise SelectionError(
                f"Scripted action {action_type}{labels} is not an enumerated candidate"
            )
        self.cursor += 1
        types = [s.name for s in context.available_types]
        return candidate, SelectionTrace(
            policy=self.name,
            type_index=types.index(schema.name),
            object_indices=context.indices_of(schema, candidate),
            candidate_count=len(context.candidates),
        )


class LlmPolicy:
    """Two agent inferences: action type first, then all objects at once.

    Each stage is retried on parse failure; when retries run out the choice
    falls back to uniform random and the trace is flagged.
    """

    name = "llm"

    def __init__(
        self,
        agent: AbstractAgent,
        *,
        model: str = DEFAULT_CONTROLLER_MODEL,
        temperature: float = DEFAULT_TEMPERATURE,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        max_parse_retries: int = DEFAULT_PARSE_RETRIES,
        type_template: PromptTemplate | None = None,
        object_template: PromptTemplate | None = None,
    ) -> None:
        self.agent = agent
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.max_parse_retries = max_parse_retries
        self.type_template = type_template
        self.object_template = object_template

    def _ask(self, prompt: str, phase: Phase, step: int, attempt: int) -> str:
        return self.agent.complete(
            AgentRequest(
                prompt=prompt,
                phase=phase,
                iteration=step,
                model=self.model,
                temperature=self.temperature,
                max_tokens=self.max_tokens,
                retry=attempt > 0,
            )
        )

    def _select_type(
        self, context: SelectionContext, texts: list[str]
    ) -> tuple[int | None, int]:
        types = [s.name for s in context.available_types]
        prompt = render_type_prompt(context.memory, types, self.type_template)
        for attempt in range(self.max_parse_retries + 1):
            text = self._ask(prompt, Phase.TYPE_SELECTION, context.step, attempt)
            texts.append(text)
            try:
                return parse_type_selection(text, len(types)), attempt
            except SelectionParseError as e:
                logger.warning(
                    "Step %d: type selection parse failure (%d/%d): %s",
                    context.step,
                    attempt + 1,
                    self.max_parse_retries + 1,
                    e,
                )
        return None, self.max_parse_retries

    def _select_objects(
        self, context: SelectionContext, schema: ActionSchema, texts: list[str]
    ) -> tuple[ActionCandidate | None, int]:
        entries = context.slot_entries(schema)
        slots = [(kind, [e.label for e in pool]) for kind, pool in zip(schema.slots, entries, strict=True)]
        prompt = render_object_prompt(context.memory, slots, self.object_template)
        for attempt in range(self.max_parse_retries + 1):
            text = self._ask(prompt, Phase.OBJECT_SELECTION, context.step, attempt)
            texts.append(text)
            try:
                indices = parse_object_selection(text, [len(p) for p in entries])
                bindings = [pool[i].id for pool, i in zip(entries, indices, strict=True)]
                candidate = context.resolve(schema, bindings)
                if candidate is None:
                    raise SelectionParseError(
                        f"Selection {indices} is not a candidate of {schema.name}", text
                    )
                return candidate, attempt
            except SelectionParseError as e:
                logger.warning(
                    "Step %d: object selection parse failure (%d/%d): %s",
                    context.step,
                    attempt + 1,
                    self.max_parse_retries + 1,
                    e,
                )
        return None, self.max_parse_retries

    def select(self, context: SelectionContext) -> tuple[ActionCandidate, SelectionTrace]:
        texts: list[str] = []
        available = context.available_types
        type_index, retries = self._select_type(context, texts)

        fallback = False
        if type_index is None:
            logger.warning("Step %d: falling back to uniform random action", context.step)
            candidate = _uniform(context, context.candidates)
            fallback = True
        else:
            schema = available[type_index]
            chosen, object_retries = self._select_objects(context, schema, texts)
            retries += object_retries
            if chosen is None:
                logger.warning(
                    "Step %d: falling back to uniform random %s candidate",
                    context.step,
                    schema.name,
                )
                chosen = _uniform(context, context.by_type[schema.name])
                fallback = True
            candidate = chosen

        schema = _schema_named(context, candidate.schema)
        return candidate, SelectionTrace(
            policy=self.name,
            type_index=[s.name for s in available].index(schema.name),
            object_indices=context.indices_of(schema, candidate),
            candidate_count=len(context.candidates),
            raw_texts=tuple(texts),
            retries=retries,
            fallback=fallback,
        )


def select_action(
    policy: Policy,
    memory: str,
    schemas: Sequence[ActionSchema],
    pool: Pool,
    rng: np.random.Generator,
    *,
    step: int = 1,
    unordered_pairs: bool = True,
    candidates: list[ActionCandidate] | None = None,
) -> tuple[ActionCandidate, SelectionTrace]:
    """Choose one action for an iteration.

    Args:
        policy: Selection policy
        memory: Current memory text
        schemas: Action schemas in declaration order
        pool: Current object pool
        rng: Run random generator
        step: Iteration index
        unordered_pairs: Enumeration flag for symmetric merge slots
        candidates: Precomputed enumeration of ``pool``

    Returns:
        The chosen candidate and how it was chosen

    Raises:
        SelectionError: If no candidate exists
    """
    if candidates is None:
        candidates = enumerate_candidates(schemas, pool, unordered_pairs=unordered_pairs)
    if not candidates:
        raise SelectionError(f"No action candidates at step {step}")
    context = SelectionContext(
        memory=memory,
        schemas=schemas,
        pool=pool,
        candidates=candidates,
        step=step,
        rng=rng,
    )
    candidate, trace = policy.select(context)
    logger.debug(
        "Step %d: %s selected %s over %d candidates%s",
        step,
        policy.name,
        candidate.schema,
        len(candidates),
        " (fallback)" if trace.fallback else "",
    )
    return candidate, trace
