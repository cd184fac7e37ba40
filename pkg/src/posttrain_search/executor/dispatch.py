"""Binding action types to executors and running chosen actions."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

from ..actions import ActionCandidate, ActionSchema
from ..constants import DEFAULT_SHELL_TIMEOUT
from ..exceptions import ConfigError, ExecutorError, SearchError
from ..logging import get_logger
from ..registry import ModelArtifact, Registry, generated_model_label
from .base import ExecutionContext, ExecutorBinding, SimParams, default_roles
from .registry import EXECUTORS, ExecutorKind

logger = get_logger(__name__)

# Action types bound without an explicit "executors" entry.
DEFAULT_EXECUTOR_KINDS: dict[str, ExecutorKind] = {
    "sft": ExecutorKind.SIM_SFT,
    "ties_merging": ExecutorKind.SIM_TIES,
}


def build_bindings(
    schemas: Sequence[ActionSchema], executors: Mapping[str, Mapping[str, Any]]
) -> dict[str, ExecutorBinding]:
    """Bind every action type to an executor.

    Args:
        schemas: Declared action schemas
        executors: The config's ``executors`` section

    Returns:
        Action type name to binding

    Raises:
        ConfigError: Listing every unbound or inconsistent action type
    """
    problems: list[str] = []
    bindings: dict[str, ExecutorBinding] = {}
    names = {s.name for s in schemas}

    for name in executors:
        if name not in names:
            problems.append(f"executor bound to undeclared action type {name!r}")

    for schema in schemas:
        raw = executors.get(schema.name, {})
        kind_name = raw.get("kind", DEFAULT_EXECUTOR_KINDS.get(schema.name))
        if kind_name is None:
            problems.append(f"action type {schema.name!r} has no executor")
            continue
        try:
            kind = ExecutorKind(kind_name)
        except ValueError:
            problems.append(f"action type {schema.name!r}: unknown executor kind {kind_name!r}")
            continue

        roles = tuple(raw.get("roles") or default_roles(schema.slots))
        if len(roles) != len(schema.slots):
            problems.append(
                f"action type {schema.name!r}: {len(roles)} roles for {len(schema.slots)} slots"
            )
            continue
        if len(set(roles)) != len(roles):
            problems.append(f"action type {schema.name!r}: duplicate roles {list(roles)}")
            continue
        missing = [r for r in EXECUTORS[kind].required_roles if r not in roles]
        if missing:
            problems.append(f"action type {schema.name!r}: {kind} needs roles {missing}")
            continue
        command = str(raw.get("command", ""))
        if kind is ExecutorKind.SHELL and not command:
            problems.append(f"action type {schema.name!r}: shell executor needs a command")
            continue

        bindings[schema.name] = ExecutorBinding(
            action_type=schema.name,
            kind=kind,
            roles=roles,
            command=command,
            timeout=float(raw.get("timeout", DEFAULT_SHELL_TIMEOUT)),
        )

    if problems:
        raise ConfigError("; ".join(problems))
    return bindings


def produce(
    candidate: ActionCandidate,
    registry: Registry,
    binding: ExecutorBinding,
    context: ExecutionContext,
) -> Any:
    """Run an action's executor and return the new payload, registering nothing."""
    inputs = {
        role: registry.get(object_id).payload
        for role, object_id in zip(binding.roles, candidate.bindings, strict=True)
    }
    spec = EXECUTORS[ExecutorKind(binding.kind)]
    try:
        return spec.run(binding, inputs, context)
    except SearchError:
        raise
    except Exception as e:
        logger.exception("Executor %s failed for %s", binding.kind, context.label)
        raise ExecutorError(f"{binding.kind} failed for {context.label}: {e}") from e


def execute(
    candidate: ActionCandidate,
    registry: Registry,
    bindings: Mapping[str, ExecutorBinding],
    *,
    step: int,
    index: int = 0,
    params: SimParams | None = None,
    output_dir: str | Path = ".",
    records: list[dict[str, Any]] | None = None,
) -> ModelArtifact:
    """Execute a chosen action and register its output model as "0--step--index".

    Args:
        candidate: Chosen action
        registry: Run registry
        bindings: Action type to executor bindings
        step: Iteration index
        index: Within-step model index
        params: Simulated dynamics constants
        output_dir: Directory for shell executor outputs
        records: Receives captured executor output (shell stdout/stderr)

    Returns:
        The registered artifact
    """
    binding = bindings.get(candidate.schema)
    if binding is None:
        raise ConfigError(f"Action type {candidate.schema!r} is not bound to an executor")

    context = ExecutionContext(
        step=step,
        index=index,
        label=generated_model_label(step, index),
        params=params or SimParams(),
        output_dir=Path(output_dir),
    )
    payload = produce(candidate, registry, binding, context)
    artifact = registry.register_model(
        step=step,
        index=index,
        payload=payload,
        action_type=candidate.schema,
        inputs=candidate.bindings,
    )
    if records is not None:
        records.extend(context.records)
    logger.debug("Executed %s -> %s", candidate.describe(registry), artifact.label)
    return artifact
