"""Search loop driver with checkpoint/resume, Top-k and window statistics."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .actions import ActionCandidate, enumerate_candidates
from .agent import AbstractAgent, AgentTrace, ChatCompletionsAgent, Phase, ScriptedAgent
from .config import (
    RunConfig,
    build_evaluators,
    build_executor_bindings,
    build_registry,
    build_tasks,
    parse_config,
    validate_config,
)
from .constants import CHECKPOINT_VERSION, DEFAULT_WINDOW, RANDOM_CONTROLLER
from .evaluation import ScoreVector, aggregate, evaluate
from .exceptions import CheckpointError, ConfigError, ExecutorError, SearchError, StepAborted
from .executor import (
    ExecutionContext,
    decode_payload,
    encode_payload,
    execute,
    produce,
)
from .logging import get_logger
from .memory import MemoryState, TrialHistory, TrialRecord, update_memory
from .policy import LlmPolicy, Policy, RandomPolicy, ScriptedPolicy, select_action
from .registry import (
    ModelArtifact,
    ObjectEntry,
    Registry,
    generated_model_label,
)
from .tracefile import ABORT, AGENT, EXECUTOR, MEMORY, SELECTION, TRIAL, TraceWriter

logger = get_logger(__name__)


@dataclass(slots=True)
class RunState:
    """Everything needed to continue a run."""

    registry: Registry
    history: TrialHistory
    memories: list[MemoryState]
    agent_trace: AgentTrace
    rng: np.random.Generator
    step: int = 0
    trace_offset: int = 0

    @property
    def memory(self) -> str:
        """Latest memory text, "" before the first update."""
        return self.memories[-1].text if self.memories else ""


def new_state(config: RunConfig, agent_trace: AgentTrace | None = None) -> RunState:
    return RunState(
        registry=build_registry(config),
        history=TrialHistory(),
        memories=[],
        agent_trace=agent_trace if agent_trace is not None else AgentTrace(),
        rng=np.random.default_rng(config.seed),
    )


@dataclass(slots=True, frozen=True)
class WindowStats:
    """Statistics of one window of consecutive trials."""

    start: int
    size: int
    mean: float
    maximum: float
    std: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": self.start,
            "size": self.size,
            "mean": self.mean,
            "max": self.maximum,
            "std": self.std,
        }


def _scores(history: TrialHistory | Sequence[float]) -> list[float]:
    if isinstance(history, TrialHistory):
        return [r.aggregate for r in history]
    return [float(s) for s in history]


def window_stats(
    history: TrialHistory | Sequence[float], window: int = DEFAULT_WINDOW
) -> list[WindowStats]:
    """Mean, max and population std of aggregates per window; the last may be partial.

    Args:
        history: Trials (or their aggregates) in step order
        window: Trials per window

    Returns:
        One entry per window; ``start`` is the 1-based step of its first trial
    """
    if window < 1:
        raise ValueError(f"Window must be positive, got {window}")
    scores = _scores(history)
    stats = []
    for offset in range(0, len(scores), window):
        chunk = np.asarray(scores[offset : offset + window], dtype=np.float64)
        stats.append(
            WindowStats(
                start=offset + 1,
                size=int(chunk.size),
                mean=float(np.mean(chunk)),
                maximum=float(np.max(chunk)),
                std=float(np.std(chunk)),
            )
        )
    return stats


def running_max(history: TrialHistory | Sequence[float]) -> list[float]:
    """Cumulative best aggregate after each trial."""
    scores = _scores(history)
    if not scores:
        return []
    return [float(v) for v in np.maximum.accumulate(np.asarray(scores, dtype=np.float64))]


@dataclass(slots=True, frozen=True)
class RankedModel:
    rank: int
    record: TrialRecord
    artifact: ModelArtifact


@dataclass(slots=True, frozen=True)
class TopK:
    """Best generated models; ``truncated`` when fewer than requested exist."""

    models: tuple[RankedModel, ...]
    requested: int
    truncated: bool


def top_k(state: RunState, k: int) -> TopK:
    """Generated models by validation aggregate, descending; earlier step wins ties."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ranked = sorted(state.history, key=lambda r: (-r.aggregate, r.step))
    truncated = k > len(ranked)
    if truncated:
        logger.warning("Requested top %d but only %d models exist", k, len(ranked))
    return TopK(
        models=tuple(
            RankedModel(rank=i + 1, record=r, artifact=state.registry.artifact(r.produced_id))
            for i, r in enumerate(ranked[:k])
        ),
        requested=k,
        truncated=truncated,
    )


def replay_lineage(history: Iterable[TrialRecord]) -> set[tuple[str, tuple[str, ...], str]]:
    """Label-level lineage rebuilt from trial records alone."""
    return {(r.action_type, r.labels, r.produced_label) for r in history}


def abort_record(step: int, error: BaseException) -> dict[str, Any]:
    """Trace record of an aborted step, with any captured command output."""
    result = error.result if isinstance(error, ExecutorError) else None
    return {
        "type": ABORT,
        "step": step,
        "error": f"{type(error).__name__}: {error}",
        "records": [result.to_dict()] if result is not None else [],
    }


def build_agent(config: RunConfig) -> AbstractAgent | None:
    """Agent for agent-driven controllers: script file first, then the endpoint."""
    if not config.uses_agent:
        return None
    if config.policy_options.script:
        return ScriptedAgent.from_file(config.base_dir / config.policy_options.script)
    endpoint = config.endpoint
    if endpoint.url:
        return ChatCompletionsAgent(
            endpoint.url,
            api_key_env=endpoint.api_key_env,
            timeout=endpoint.timeout,
            max_attempts=endpoint.max_attempts,
            backoff_base=endpoint.backoff_base,
        )
    raise ConfigError("Agent controller needs endpoint.url or policy_options.script")


def build_policy(config: RunConfig, agent: AbstractAgent | None) -> Policy:
    if config.controller == RANDOM_CONTROLLER:
        return RandomPolicy()
    if config.uses_agent:
        if agent is None:
            raise ConfigError(f"Controller {config.controller!r} needs an agent")
        return LlmPolicy(
            agent,
            model=config.controller_model,
            temperature=config.endpoint.temperature,
            max_tokens=config.endpoint.max_tokens,
            max_parse_retries=config.policy_options.max_parse_retries,
        )
    return ScriptedPolicy(config.policy_options.sequence)


class Orchestrator:
    """Runs the enumerate / select / execute-evaluate / memory loop."""

    def __init__(
        self,
        config: RunConfig,
        *,
        agent: AbstractAgent | None = None,
        trace_path: str | Path | None = None,
        checkpoint_path: str | Path | None = None,
        state: RunState | None = None,
    ) -> None:
        """Initialize orchestrator.

        Args:
            config: Validated-on-entry run configuration
            agent: Agent override (scripted agents in tests); built from config otherwise
            trace_path: JSON-lines trace destination
            checkpoint_path: Checkpoint written after every step
            state: Restored state (resume); a fresh one by default
        """
        validate_config(config)
        self.config = config
        self.schemas = config.schemas
        self.bindings = build_executor_bindings(config)
        self.tasks = build_tasks(config)
        self.test_tasks = build_tasks(config, test=True)
        self.weights = [t.weight for t in self.tasks]
        self.evaluators = build_evaluators(config)
        self.agent = agent if agent is not None else build_agent(config)
        self.policy = build_policy(config, self.agent)
        self.state = state if state is not None else new_state(config)
        if self.agent is not None:
            self.agent.trace = self.state.agent_trace
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self._trace = TraceWriter(trace_path) if trace_path else None
        if self._trace is not None:
            self.state.trace_offset = self._trace.start(
                seed=config.seed, offset=self.state.trace_offset
            )
        self._logger = get_logger(__name__)

    @property
    def output_dir(self) -> Path:
        return self.config.base_dir / self.config.output_dir

    @property
    def uses_memory(self) -> bool:
        return self.agent is not None and isinstance(self.policy, LlmPolicy)

    def candidates(self) -> list[ActionCandidate]:
        return enumerate_candidates(
            self.schemas,
            self.state.registry.view(),
            unordered_pairs=self.config.policy_options.unordered_merge_pairs,
        )

    def score(self, artifact: ModelArtifact, *, split: str = "validation") -> tuple[ScoreVector, float]:
        tasks = self.tasks if split == "validation" else self.test_tasks
        scores = evaluate(
            artifact, tasks, self.evaluators, split=split, parallelism=self.config.parallelism
        )
        weights = [t.weight for t in tasks]
        return scores, aggregate(scores, weights, self.config.score_aggregation)

    def preview(self, candidate: ActionCandidate) -> float:
        """Validation aggregate the candidate would reach, without registering anything."""
        step = self.state.step + 1
        label = generated_model_label(step, 0)
        context = ExecutionContext(
            step=step,
            index=0,
            label=label,
            params=self.config.simulator.params,
            output_dir=self.output_dir,
        )
        payload = produce(candidate, self.state.registry, self.bindings[candidate.schema], context)
        entry = ObjectEntry(id="preview", kind="models", label=label, payload=payload, provenance="preview")
        _, value = self.score(ModelArtifact(object=entry, step=step, index=0))
        return value

    def step(self) -> RunState:
        """Run one iteration.

        Returns:
            The updated state

        Raises:
            SearchError: If the budget is already spent
            StepAborted: On any failure; state is back at the pre-step checkpoint
        """
        state = self.state
        if state.step >= self.config.total_timesteps:
            raise SearchError(f"Budget of {self.config.total_timesteps} steps already spent")
        t = state.step + 1
        snapshot = self.to_checkpoint()
        agent_offset = len(state.agent_trace)

        try:
            records = self._iterate(t, agent_offset)
            if self._trace is not None:
                state.trace_offset = self._trace.append(records)
        except Exception as e:
            self._logger.warning("Step %d aborted: %s", t, e)
            self._restore(snapshot)
            if self._trace is not None:
                self._trace.rewind(self.state.trace_offset)
                self.state.trace_offset = self._trace.append([abort_record(t, e)])
            if self.checkpoint_path is not None:
                self.checkpoint()
            raise StepAborted(f"Step {t} aborted: {type(e).__name__}: {e}") from e

        if self.checkpoint_path is not None:
            self.checkpoint()
        return state

    def _iterate(self, t: int, agent_offset: int) -> list[dict[str, Any]]:
        state = self.state
        opts = self.config.policy_options
        pool = state.registry.view()

        candidates = self.candidates()
        self._logger.debug("Step %d: %d candidates", t, len(candidates))
        candidate, selection = select_action(
            self.policy,
            state.memory,
            self.schemas,
            pool,
            state.rng,
            step=t,
            candidates=candidates,
        )

        executor_records: list[dict[str, Any]] = []
        artifact = execute(
            candidate,
            state.registry,
            self.bindings,
            step=t,
            params=self.config.simulator.params,
            output_dir=self.output_dir,
            records=executor_records,
        )
        scores, value = self.score(artifact)

        record = TrialRecord(
            step=t,
            action_type=candidate.schema,
            bindings=candidate.bindings,
            labels=candidate.labels(state.registry),
            scores=scores.values,
            aggregate=value,
            produced_label=artifact.label,
            produced_id=artifact.id,
            fallback=selection.fallback,
        )
        previous = state.history.records
        state.history.append(record)

        memory: MemoryState | None = None
        if self.uses_memory:
            assert self.agent is not None
            memory = update_memory(
                self.agent,
                previous,
                state.memories,
                [record],
                model=self.config.controller_model,
                temperature=self.config.endpoint.temperature,
                max_tokens=self.config.endpoint.max_tokens,
                memory_cap=opts.memory_cap,
                per_task=opts.memory_per_task_scores,
            )
            state.memories.append(memory)
        state.step = t

        self._logger.info(
            "Step %d/%d: %s -> %s, score %.3f",
            t,
            self.config.total_timesteps,
            candidate.describe(state.registry),
            artifact.label,
            value,
        )

        calls = state.agent_trace.since(agent_offset)
        agent_lines = [
            {"type": AGENT, **c.to_dict(include_latency=opts.trace_latency)} for c in calls
        ]
        selecting = [line for line, c in zip(agent_lines, calls, strict=True) if c.phase != Phase.MEMORY_UPDATE]
        remembering = [line for line, c in zip(agent_lines, calls, strict=True) if c.phase == Phase.MEMORY_UPDATE]
        selection_data = selection.to_dict()
        selection_data.pop("raw_texts")

        lines: list[dict[str, Any]] = [
            *selecting,
            {
                "type": SELECTION,
                "step": t,
                "action_type": candidate.schema,
                "labels": list(record.labels),
                **selection_data,
            },
            {
                "type": EXECUTOR,
                "step": t,
                "kind": str(self.bindings[candidate.schema].kind),
                "output": artifact.label,
                "records": executor_records,
            },
            {"type": TRIAL, **record.to_dict()},
            *remembering,
        ]
        if memory is not None:
            lines.append({"type": MEMORY, **memory.to_dict()})
        return lines

    def run(self) -> RunState:
        """Iterate until the budget is spent."""
        while self.state.step < self.config.total_timesteps:
            self.step()
        return self.state

    def to_checkpoint(self) -> dict[str, Any]:
        state = self.state
        agent_cursor = self.agent.cursor() if isinstance(self.agent, ScriptedAgent) else None
        policy_cursor = self.policy.cursor if isinstance(self.policy, ScriptedPolicy) else None
        return {
            "version": CHECKPOINT_VERSION,
            "config": self.config.raw,
            "base_dir": str(self.config.base_dir),
            "step": state.step,
            "registry": state.registry.to_dict(encode_payload),
            "history": [r.to_dict() for r in state.history],
            "memories": [m.to_dict() for m in state.memories],
            "agent_trace": state.agent_trace.to_dicts(),
            "rng": state.rng.bit_generator.state,
            "agent_cursor": agent_cursor,
            "policy_cursor": policy_cursor,
            "trace_offset": state.trace_offset,
        }

    def _restore(self, data: Mapping[str, Any]) -> None:
        self.state = state_from_checkpoint(data)
        if self.agent is not None:
            self.agent.trace = self.state.agent_trace
        if isinstance(self.agent, ScriptedAgent) and data.get("agent_cursor") is not None:
            self.agent.restore_cursor(data["agent_cursor"])
        if isinstance(self.policy, ScriptedPolicy) and data.get("policy_cursor") is not None:
            self.policy.cursor = int(data["policy_cursor"])

    def checkpoint(self, path: str | Path | None = None) -> Path:
        """Write the current state atomically.

        Returns:
            Path written
        """
        target = Path(path) if path is not None else self.checkpoint_path
        if target is None:
            raise CheckpointError("No checkpoint path configured")
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_text(json.dumps(self.to_checkpoint(), sort_keys=True), encoding="utf-8")
        os.replace(tmp, target)
        return target

    @classmethod
    def from_checkpoint(
        cls,
        path: str | Path,
        *,
        agent: AbstractAgent | None = None,
        trace_path: str | Path | None = None,
        checkpoint_path: str | Path | None = None,
        endpoint: str | None = None,
    ) -> Orchestrator:
        """Rebuild an orchestrator from a checkpoint; the trace is cut back to its offset.

        ``endpoint`` replaces the recorded chat-completions URL.
        """
        data = load_checkpoint(path)
        config = parse_config(data["config"], data.get("base_dir", "."))
        if endpoint is not None:
            config = config.with_overrides(endpoint=endpoint)
        orchestrator = cls(
            config,
            agent=agent,
            trace_path=trace_path,
            checkpoint_path=checkpoint_path if checkpoint_path is not None else path,
            state=state_from_checkpoint(data),
        )
        orchestrator._restore(data)
        orchestrator._logger.info("Resumed at step %d of %d", orchestrator.state.step, config.total_timesteps)
        return orchestrator


def load_checkpoint(path: str | Path) -> dict[str, Any]:
    """Read a checkpoint document.

    Raises:
        CheckpointError: Missing, unreadable, or version mismatch
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Checkpoint {path} is corrupt: {e}") from e
    if not isinstance(data, dict):
        raise CheckpointError(f"Checkpoint {path} is not a JSON object")
    if data.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"Checkpoint {path} version {data.get('version')} unsupported (expected {CHECKPOINT_VERSION})"
        )
    return data


def state_from_checkpoint(data: Mapping[str, Any]) -> RunState:
    try:
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = data["rng"]
        state = RunState(
            registry=Registry.from_dict(data["registry"], decode_payload),
            history=TrialHistory(TrialRecord.from_dict(r) for r in data["history"]),
            memories=[MemoryState.from_dict(m) for m in data["memories"]],
            agent_trace=AgentTrace.from_dicts(data["agent_trace"]),
            rng=rng,
            step=int(data["step"]),
            trace_offset=int(data["trace_offset"]),
        )
    except SearchError as e:
        raise CheckpointError(f"Checkpoint state invalid: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Checkpoint missing or malformed field: {e}") from e
    if state.step != len(state.history):
        raise CheckpointError(
            f"Checkpoint step {state.step} disagrees with {len(state.history)} trials"
        )
    return state


def run(
    config: RunConfig,
    *,
    agent: AbstractAgent | None = None,
    trace_path: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
) -> RunState:
    """Run a configured search to its budget."""
    return Orchestrator(
        config, agent=agent, trace_path=trace_path, checkpoint_path=checkpoint_path
    ).run()


def resume(
    path: str | Path,
    *,
    agent: AbstractAgent | None = None,
    trace_path: str | Path | None = None,
    endpoint: str | None = None,
) -> RunState:
    """Restore a checkpointed run and complete it."""
    return Orchestrator.from_checkpoint(
        path, agent=agent, trace_path=trace_path, endpoint=endpoint
    ).run()
