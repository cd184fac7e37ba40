"""Action schema and candidate types."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import TYPE_CHECKING, Any

from ..exceptions import ConfigError

if TYPE_CHECKING:
    from ..registry import Registry


class PairMode(StrEnum):
    """How repeated slots of the same kind (e.g. two merge models) combine."""

    UNORDERED = "unordered"  # each unordered pair once, no self-pairs
    ORDERED = "ordered"  # ordered pairs, no self-pairs
    PRODUCT = "product"  # plain Cartesian product


@dataclass(slots=True, frozen=True)
class ActionSchema:
    """An action type: its name and the ordered object kinds it consumes."""

    name: str
    slots: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("Action schema name must be nonempty")
        if not self.slots or any(not s for s in self.slots):
            raise ConfigError(f"Action schema {self.name!r} needs nonempty slot kinds")

    @property
    def repeated_kinds(self) -> dict[str, tuple[int, ...]]:
        """Kinds bound by more than one slot, with their slot positions."""
        positions: dict[str, list[int]] = {}
        for i, kind in enumerate(self.slots):
            positions.setdefault(kind, []).append(i)
        return {k: tuple(v) for k, v in positions.items() if len(v) > 1}

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "slots": list(self.slots)}


@dataclass(slots=True, frozen=True)
class ActionCandidate:
    """An action type with one bound object id per slot."""

    schema: str
    bindings: tuple[str, ...]

    def labels(self, registry: Registry) -> tuple[str, ...]:
        return tuple(registry.get(i).label for i in self.bindings)

    def describe(self, registry: Registry) -> str:
        return f"{self.schema}({', '.join(self.labels(registry))})"

    def to_dict(self) -> dict[str, Any]:
        return {"schema": self.schema, "bindings": list(self.bindings)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ActionCandidate:
        return cls(schema=str(data["schema"]), bindings=tuple(data["bindings"]))


def schemas_from_mapping(action_types: Mapping[str, Sequence[str]]) -> list[ActionSchema]:
    """Build schemas from the config's ``action_types`` mapping, in declaration order."""
    return [ActionSchema(name, tuple(slots)) for name, slots in action_types.items()]
