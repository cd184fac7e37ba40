"""Executor bindings and specs."""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..constants import DEFAULT_N0, DEFAULT_LR_REF, DEFAULT_PHI, DEFAULT_SHELL_TIMEOUT
from ..exceptions import ExecutorParameterError

# Placeholder role per object kind; repeated kinds number from the second: model, model2.
DEFAULT_ROLES: dict[str, str] = {
    "models": "model",
    "base_models": "base",
    "sft_dataset": "dataset",
    "sft_lr": "lr",
    "ties_weights": "weights",
    "ties_density": "density",
}


def default_roles(slots: Sequence[str]) -> tuple[str, ...]:
    """Derive placeholder roles for a schema's slots."""
    roles: list[str] = []
    seen: dict[str, int] = {}
    for kind in slots:
        role = DEFAULT_ROLES.get(kind, kind)
        seen[role] = seen.get(role, 0) + 1
        roles.append(role if seen[role] == 1 else f"{role}{seen[role]}")
    return tuple(roles)


@dataclass(slots=True, frozen=True)
class SimParams:
    """Constants of the simulated training dynamics."""

    phi: float = DEFAULT_PHI
    n0: float = DEFAULT_N0
    lr_ref: float = DEFAULT_LR_REF

    def __post_init__(self) -> None:
        if not 0.0 <= self.phi <= 1.0:
            raise ExecutorParameterError(f"Forgetting factor must be in [0, 1], got {self.phi}")
        if self.n0 <= 0 or self.lr_ref <= 0:
            raise ExecutorParameterError("n0 and lr_ref must be positive")


@dataclass(slots=True, frozen=True)
class ExecutorBinding:
    """An action type bound to an executor, with one role per slot."""

    action_type: str
    kind: str
    roles: tuple[str, ...]
    command: str = ""
    timeout: float = DEFAULT_SHELL_TIMEOUT


@dataclass(slots=True, frozen=True)
class ExecutionContext:
    """Where and as what an action's output is produced."""

    step: int
    index: int
    label: str
    params: SimParams = field(default_factory=SimParams)
    output_dir: Path = Path(".")
    records: list[dict[str, Any]] = field(default_factory=list)


ExecutorFn = Callable[[ExecutorBinding, Mapping[str, Any], ExecutionContext], Any]


@dataclass(slots=True, frozen=True)
class ExecutorSpec:
    """Executor definition: required roles and the function producing a payload."""

    run: ExecutorFn
    required_roles: tuple[str, ...] = ()
    description: str = ""
