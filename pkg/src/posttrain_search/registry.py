"""Object registry with lineage from initial objects through applied actions."""

from __future__ import annotations

import re
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any

from .constants import (
    INITIAL_PROVENANCE,
    LABEL_PREFIX,
    LABEL_SEPARATOR,
    MODELS_KIND,
)
from .exceptions import DuplicateObjectError, RegistryError, UnknownObjectError
from .logging import get_logger

logger = get_logger(__name__)

MODEL_LABEL_PATTERN = re.compile(r"^0--([0-9]+)--([0-9]+)$")

PayloadEncoder = Callable[[Any], Any]
PayloadDecoder = Callable[[Any], Any]


def generated_model_label(step: int, index: int) -> str:
    """Format the label of the index-th model generated at a step.

    Args:
        step: Iteration index n (>= 1; 0 is reserved for initial objects)
        index: Within-step index k (>= 0)

    Returns:
        Label of the form "0--n--k"
    """
    if step < 1:
        raise RegistryError(
            f"Step {step} is reserved for initial objects; generated models start at 1"
        )
    if index < 0:
        raise RegistryError(f"Model index must be nonnegative, got {index}")
    return f"{LABEL_PREFIX}{LABEL_SEPARATOR}{step}{LABEL_SEPARATOR}{index}"


def parse_model_label(label: str) -> tuple[int, int]:
    """Parse a generated model label back into (step, index)."""
    match = MODEL_LABEL_PATTERN.match(label)
    if match is None:
        raise RegistryError(f"Not a generated model label: {label!r}")
    step, index = int(match.group(1)), int(match.group(2))
    if step < 1:
        raise RegistryError(f"Generated model label has reserved step 0: {label!r}")
    return step, index


def is_generated_label(label: str) -> bool:
    """Check whether a label follows the generated-model grammar."""
    try:
        parse_model_label(label)
    except RegistryError:
        return False
    return True


@dataclass(slots=True, frozen=True)
class ObjectEntry:
    """A model, dataset or hyperparameter value available for binding."""

    id: str
    kind: str
    label: str
    payload: Any
    provenance: str = INITIAL_PROVENANCE

    @property
    def is_initial(self) -> bool:
        return self.provenance == INITIAL_PROVENANCE


@dataclass(slots=True, frozen=True)
class ModelArtifact:
    """A model object together with its position in the run."""

    object: ObjectEntry
    step: int
    index: int

    @property
    def id(self) -> str:
        return self.object.id

    @property
    def label(self) -> str:
        return self.object.label


@dataclass(slots=True, frozen=True)
class LineageEdge:
    """One executed action: input objects -> action -> output artifact."""

    action_id: str
    action_type: str
    inputs: tuple[str, ...]
    output: str
    step: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "action_id": self.action_id,
            "action_type": self.action_type,
            "inputs": list(self.inputs),
            "output": self.output,
            "step": self.step,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> LineageEdge:
        return cls(
            action_id=str(data["action_id"]),
            action_type=str(data["action_type"]),
            inputs=tuple(str(i) for i in data["inputs"]),
            output=str(data["output"]),
            step=int(data["step"]),
        )


@dataclass(slots=True, frozen=True)
class PipelineStep:
    """One action in a reconstructed pipeline.

    ``branch`` is the path of merge-parent positions from the final model down
    to this action; the empty tuple is the main line.
    """

    action_id: str
    action_type: str
    labels: tuple[str, ...]
    output: str
    step: int
    branch: tuple[int, ...] = ()

    def describe(self) -> str:
        return f"{self.action_type}({', '.join(self.labels)}) -> {self.output}"


def action_id_for(step: int, index: int = 0) -> str:
    """Identifier of the action executed at a step."""
    return f"action-{step}-{index}"


class Registry:
    """Owns every object of a run and the lineage graph linking them."""

    def __init__(self) -> None:
        self._entries: dict[str, ObjectEntry] = {}
        self._by_label: dict[tuple[str, str], str] = {}
        self._by_kind: dict[str, list[str]] = {}
        self._artifacts: dict[str, ModelArtifact] = {}
        self._edges: dict[str, LineageEdge] = {}
        self._counter = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, object_id: object) -> bool:
        return object_id in self._entries

    def _next_id(self) -> str:
        self._counter += 1
        return f"obj-{self._counter:05d}"

    def register_object(
        self,
        kind: str,
        label: str,
        payload: Any,
        provenance: str = INITIAL_PROVENANCE,
    ) -> ObjectEntry:
        """Register an object under (kind, label).

        Args:
            kind: Object category (e.g. "models", "sft_dataset")
            label: Human-readable name, unique within kind
            payload: Opaque handle to the underlying value
            provenance: "initial" or the producing action id

        Returns:
            The registered entry

        Raises:
            DuplicateObjectError: If the label is already used within kind
        """
        if not kind:
            raise RegistryError("Object kind must be nonempty")
        if (kind, label) in self._by_label:
            raise DuplicateObjectError(
                f"Label {label!r} already registered under kind {kind!r}"
            )

        entry = ObjectEntry(
            id=self._next_id(),
            kind=kind,
            label=label,
            payload=payload,
            provenance=provenance,
        )
        self._entries[entry.id] = entry
        self._by_label[(kind, label)] = entry.id
        self._by_kind.setdefault(kind, []).append(entry.id)
        if kind == MODELS_KIND and entry.is_initial:
            self._artifacts[entry.id] = ModelArtifact(object=entry, step=0, index=0)
        logger.debug("Registered %s/%s as %s", kind, label, entry.id)
        return entry

    def register_model(
        self,
        *,
        step: int,
        index: int,
        payload: Any,
        action_type: str,
        inputs: Sequence[str],
    ) -> ModelArtifact:
        """Register a generated model and the edge of the action producing it."""
        missing = [i for i in inputs if i not in self._entries]
        if missing:
            raise UnknownObjectError(f"Action inputs not registered: {missing}")

        action_id = action_id_for(step, index)
        if action_id in self._edges:
            raise RegistryError(f"Action {action_id} already recorded")

        entry = self.register_object(
            MODELS_KIND,
            generated_model_label(step, index),
            payload,
            provenance=action_id,
        )
        artifact = ModelArtifact(object=entry, step=step, index=index)
        self._artifacts[entry.id] = artifact
        self._edges[action_id] = LineageEdge(
            action_id=action_id,
            action_type=action_type,
            inputs=tuple(inputs),
            output=entry.id,
            step=step,
        )
        return artifact

    def get(self, object_id: str) -> ObjectEntry:
        try:
            return self._entries[object_id]
        except KeyError:
            raise UnknownObjectError(f"Unknown object id: {object_id}") from None

    def lookup(self, kind: str, label: str) -> ObjectEntry:
        try:
            return self._entries[self._by_label[(kind, label)]]
        except KeyError:
            raise UnknownObjectError(
                f"No object labelled {label!r} under kind {kind!r}"
            ) from None

    def find_label(self, label: str) -> list[ObjectEntry]:
        """All entries carrying a label, in registration order."""
        return [e for e in self._entries.values() if e.label == label]

    def by_kind(self, kind: str) -> list[ObjectEntry]:
        return [self._entries[i] for i in self._by_kind.get(kind, [])]

    def kinds(self) -> list[str]:
        return list(self._by_kind)

    def view(self) -> Mapping[str, tuple[ObjectEntry, ...]]:
        """Immutable snapshot of the pool, kinds and entries in registration order."""
        return MappingProxyType(
            {kind: tuple(self.by_kind(kind)) for kind in self._by_kind}
        )

    def pool_sizes(self) -> dict[str, int]:
        return {kind: len(ids) for kind, ids in self._by_kind.items()}

    def artifact(self, object_id: str) -> ModelArtifact:
        try:
            return self._artifacts[object_id]
        except KeyError:
            raise UnknownObjectError(f"Not a model artifact: {object_id}") from None

    def artifact_by_label(self, label: str) -> ModelArtifact:
        return self.artifact(self.lookup(MODELS_KIND, label).id)

    @property
    def edges(self) -> list[LineageEdge]:
        return sorted(self._edges.values(), key=lambda e: (e.step, e.action_id))

    def producing_edge(self, object_id: str) -> LineageEdge | None:
        entry = self.get(object_id)
        if entry.is_initial:
            return None
        return self._edges.get(entry.provenance)

    def lineage_pipeline(self, artifact: ModelArtifact | str) -> list[PipelineStep]:
        """Reconstruct the pipeline that produced an artifact, root-first.

        Merge parents become separate branches; the result is flattened in
        execution order.
        """
        object_id = artifact if isinstance(artifact, str) else artifact.id
        if object_id not in self._artifacts:
            raise UnknownObjectError(f"Unknown model artifact: {object_id}")

        collected: dict[str, PipelineStep] = {}
        self._collect(object_id, (), collected)
        return sorted(collected.values(), key=lambda s: (s.step, s.action_id))

    def _collect(
        self,
        object_id: str,
        branch: tuple[int, ...],
        collected: dict[str, PipelineStep],
    ) -> None:
        edge = self.producing_edge(object_id)
        if edge is None or edge.action_id in collected:
            return

        parents = [i for i in edge.inputs if self.get(i).kind == MODELS_KIND]
        for position, parent in enumerate(parents):
            parent_branch = branch + (position,) if len(parents) > 1 else branch
            self._collect(parent, parent_branch, collected)

        collected[edge.action_id] = PipelineStep(
            action_id=edge.action_id,
            action_type=edge.action_type,
            labels=tuple(self.get(i).label for i in edge.inputs),
            output=self.get(edge.output).label,
            step=edge.step,
            branch=branch,
        )

    def lineage_signature(self) -> set[tuple[str, tuple[str, ...], str]]:
        """Label-level view of the lineage graph, for isomorphism checks."""
        return {
            (
                e.action_type,
                tuple(self.get(i).label for i in e.inputs),
                self.get(e.output).label,
            )
            for e in self._edges.values()
        }

    def to_dict(self, encode: PayloadEncoder) -> dict[str, Any]:
        """Serialize entries and edges; payloads pass through ``encode``."""
        return {
            "counter": self._counter,
            "entries": [
                {
                    "id": e.id,
                    "kind": e.kind,
                    "label": e.label,
                    "payload": encode(e.payload),
                    "provenance": e.provenance,
                }
                for e in self._entries.values()
            ],
            "artifacts": [
                {"id": a.id, "step": a.step, "index": a.index}
                for a in self._artifacts.values()
            ],
            "edges": [e.to_dict() for e in self._edges.values()],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], decode: PayloadDecoder) -> Registry:
        registry = cls()
        try:
            for raw in data["entries"]:
                entry = ObjectEntry(
                    id=str(raw["id"]),
                    kind=str(raw["kind"]),
                    label=str(raw["label"]),
                    payload=decode(raw["payload"]),
                    provenance=str(raw["provenance"]),
                )
                registry._entries[entry.id] = entry
                registry._by_label[(entry.kind, entry.label)] = entry.id
                registry._by_kind.setdefault(entry.kind, []).append(entry.id)
            for raw in data["artifacts"]:
                entry = registry._entries[str(raw["id"])]
                registry._artifacts[entry.id] = ModelArtifact(
                    object=entry, step=int(raw["step"]), index=int(raw["index"])
                )
            for raw in data["edges"]:
                edge = LineageEdge.from_dict(raw)
                registry._edges[edge.action_id] = edge
            registry._counter = int(data["counter"])
        except (KeyError, TypeError, ValueError) as e:
            raise RegistryError(f"Malformed registry snapshot: {e}") from e
        return registry


def register_all(
    registry: Registry, objects: Iterable[tuple[str, str, Any]]
) -> list[ObjectEntry]:
    """Register initial (kind, label, payload) triples in order."""
    return [registry.register_object(k, lbl, p) for k, lbl, p in objects]
