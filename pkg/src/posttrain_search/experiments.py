"""Experiment drivers: pipeline replays, TIES grid search, random baseline."""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, TypeVar

from .actions import ActionCandidate
from .config import (
    RunConfig,
    build_evaluators,
    build_executor_bindings,
    build_tasks,
    initial_objects,
)
from .constants import DEFAULT_GRID_STEP, PIPELINE_VERSION, RANDOM_CONTROLLER
from .evaluation import ScoreVector, aggregate, evaluate
from .exceptions import ConfigError, ExecutorError, UnknownObjectError
from .executor import MergeSpec, SimDataset, SimModel, execute, ties_merge
from .logging import get_logger
from .orchestrator import Orchestrator, RunState, run
from .registry import ModelArtifact, ObjectEntry, Registry

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(slots=True, frozen=True)
class PipelineAction:
    """One action of a pipeline, referencing objects by label.

    ``output`` names the produced model so later actions can reference it.
    """

    action: str
    objects: tuple[str, ...]
    output: str

    def to_dict(self) -> dict[str, Any]:
        return {"action": self.action, "objects": list(self.objects), "output": self.output}


@dataclass(slots=True, frozen=True)
class PipelineScript:
    """An ordered, label-addressed pipeline, replayable against any pool."""

    name: str
    steps: tuple[PipelineAction, ...]

    @property
    def labels(self) -> set[str]:
        return {label for s in self.steps for label in s.objects}

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": PIPELINE_VERSION,
            "name": self.name,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PipelineScript:
        if data.get("version", PIPELINE_VERSION) != PIPELINE_VERSION:
            raise ConfigError(f"Unsupported pipeline version {data.get('version')}")
        try:
            steps = tuple(
                PipelineAction(
                    action=str(s["action"]),
                    objects=tuple(str(o) for o in s["objects"]),
                    output=str(s.get("output", f"step-{i + 1}")),
                )
                for i, s in enumerate(data["steps"])
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Malformed pipeline script: {e}") from e
        if not steps:
            raise ConfigError("Pipeline script has no steps")
        return cls(name=str(data.get("name", "pipeline")), steps=steps)

    @classmethod
    def load(cls, path: str | Path) -> PipelineScript:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as e:
            raise ConfigError(f"Cannot read pipeline {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Pipeline {path} is not JSON: {e}") from e

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_lineage(
        cls, registry: Registry, artifact: ModelArtifact | str, name: str = ""
    ) -> PipelineScript:
        """Extract the pipeline that produced an artifact."""
        steps = registry.lineage_pipeline(artifact)
        if not steps:
            raise ConfigError("Initial models have no pipeline to extract")
        return cls(
            name=name or steps[-1].output,
            steps=tuple(PipelineAction(s.action_type, s.labels, s.output) for s in steps),
        )


@dataclass(slots=True, frozen=True)
class ReplayStep:
    action: str
    labels: tuple[str, ...]
    output: str
    validation: ScoreVector
    validation_aggregate: float
    test: ScoreVector
    test_aggregate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "action": self.action,
            "labels": list(self.labels),
            "output": self.output,
            "validation": self.validation.to_dict(),
            "validation_aggregate": self.validation_aggregate,
            "test": self.test.to_dict(),
            "test_aggregate": self.test_aggregate,
        }


@dataclass(slots=True, frozen=True)
class ReplayResult:
    """Per-step scores of one pipeline replay; the last step is the final model."""

    pipeline: str
    steps: tuple[ReplayStep, ...]

    @property
    def final(self) -> ReplayStep:
        return self.steps[-1]

    def to_dict(self) -> dict[str, Any]:
        return {"pipeline": self.pipeline, "steps": [s.to_dict() for s in self.steps]}


class Scorer:
    """Validation and test scoring of models under a config."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.tasks = build_tasks(config)
        self.test_tasks = build_tasks(config, test=True)
        self.evaluators = build_evaluators(config)

    def __call__(self, artifact: ModelArtifact, split: str = "validation") -> tuple[ScoreVector, float]:
        tasks = self.tasks if split == "validation" else self.test_tasks
        scores = evaluate(
            artifact, tasks, self.evaluators, split=split, parallelism=self.config.parallelism
        )
        return scores, aggregate(scores, [t.weight for t in tasks], self.config.score_aggregation)


def _scaled_registry(config: RunConfig, dataset_factor: float) -> Registry:
    registry = Registry()
    for kind, label, payload in initial_objects(config):
        if dataset_factor != 1.0 and "dataset" in kind:
            if not isinstance(payload, SimDataset):
                raise ExecutorError(f"Dataset {label!r} is not simulated and cannot be scaled")
            payload = payload.scaled(dataset_factor)
        registry.register_object(kind, label, payload)
    return registry


def replay_pipeline(
    config: RunConfig,
    script: PipelineScript,
    *,
    dataset_factor: float = 1.0,
    substitutions: Mapping[str, str] | None = None,
) -> ReplayResult:
    """Re-execute a pipeline against the config's initial pool.

    Args:
        config: Run configuration providing objects, executors and evaluators
        script: Pipeline to replay
        dataset_factor: Multiplier on every simulated dataset's example count
        substitutions: Object label replacements (e.g. a larger base model)

    Returns:
        Validation and test scores after each step

    Raises:
        UnknownObjectError: A referenced or substituted label does not resolve
    """
    substitutions = dict(substitutions or {})
    registry = _scaled_registry(config, dataset_factor)
    bindings = build_executor_bindings(config)
    scorer = Scorer(config)

    aliases: dict[str, str] = {}
    results: list[ReplayStep] = []
    for step, action in enumerate(script.steps, start=1):
        slots = config.action_types.get(action.action)
        if slots is None:
            raise ConfigError(f"Pipeline action {action.action!r} is not a declared action type")
        if len(slots) != len(action.objects):
            raise ConfigError(
                f"Pipeline step {step}: {action.action} takes {len(slots)} objects, got {len(action.objects)}"
            )

        bindings_ids = []
        for kind, label in zip(slots, action.objects, strict=True):
            resolved = aliases.get(label, substitutions.get(label, label))
            try:
                bindings_ids.append(registry.lookup(kind, resolved).id)
            except UnknownObjectError:
                raise UnknownObjectError(
                    f"Pipeline step {step}: unresolved label {resolved!r} for kind {kind!r}"
                ) from None

        candidate = ActionCandidate(schema=action.action, bindings=tuple(bindings_ids))
        artifact = execute(
            candidate,
            registry,
            bindings,
            step=step,
            params=config.simulator.params,
            output_dir=config.base_dir / config.output_dir / f"replay-{script.name}",
        )
        aliases[action.output] = artifact.label
        validation, validation_value = scorer(artifact)
        test, test_value = scorer(artifact, "test")
        results.append(
            ReplayStep(
                action=action.action,
                labels=candidate.labels(registry),
                output=artifact.label,
                validation=validation,
                validation_aggregate=validation_value,
                test=test,
                test_aggregate=test_value,
            )
        )
    return ReplayResult(pipeline=script.name, steps=tuple(results))


def _map_ordered(fn: Callable[[T], R], items: Sequence[T], parallelism: int) -> list[R]:
    """Apply ``fn`` to every item, concurrently when allowed, results in input order."""
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def scale_data_replay(
    config: RunConfig, script: PipelineScript, factors: Sequence[float]
) -> list[tuple[float, ReplayResult]]:
    """Replay a pipeline once per dataset scale factor."""
    if not factors or any(f <= 0 for f in factors):
        raise ConfigError(f"Scale factors must be positive, got {list(factors)}")
    results = _map_ordered(
        lambda f: replay_pipeline(config, script, dataset_factor=f),
        list(factors),
        config.parallelism,
    )
    for factor, result in zip(factors, results, strict=True):
        logger.info(
            "%s x%g: validation %.4f", script.name, factor, result.final.validation_aggregate
        )
    return list(zip(factors, results, strict=True))


@dataclass(slots=True, frozen=True)
class TransferResult:
    """Scores of a pipeline before and after object substitution."""

    substitutions: dict[str, str]
    before: ReplayResult
    after: ReplayResult

    def to_dict(self) -> dict[str, Any]:
        return {
            "substitutions": dict(self.substitutions),
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
        }


def transfer_model_replay(
    config: RunConfig, script: PipelineScript, substitutions: Mapping[str, str]
) -> TransferResult:
    """Replay a pipeline as recorded and with labels substituted, side by side."""
    pool_labels = {label for _, label, _ in initial_objects(config)}
    for source, target in substitutions.items():
        if source not in script.labels and source not in pool_labels:
            raise UnknownObjectError(f"Substitution source {source!r} is not used by the pipeline")
        if target not in pool_labels:
            raise UnknownObjectError(f"Substitution target {target!r} is not in the object pool")
    before = replay_pipeline(config, script)
    after = replay_pipeline(config, script, substitutions=substitutions)
    return TransferResult(substitutions=dict(substitutions), before=before, after=after)


def simplex_lattice(n: int, step: float) -> list[tuple[float, ...]]:
    """Weight vectors with entries in {0, step, ..., 1} summing to 1, lexicographic.

    Raises:
        ConfigError: ``step`` does not divide 1 or ``n`` < 1
    """
    if n < 1:
        raise ConfigError(f"Lattice needs at least one coordinate, got {n}")
    if step <= 0:
        raise ConfigError(f"Grid step must be positive, got {step}")
    divisions = round(1.0 / step)
    if divisions < 1 or abs(divisions * step - 1.0) > 1e-9:
        raise ConfigError(f"Grid step {step} does not divide 1 evenly")

    def compositions(total: int, parts: int) -> list[tuple[int, ...]]:
        if parts == 1:
            return [(total,)]
        return [(head, *rest) for head in range(total + 1) for rest in compositions(total - head, parts - 1)]

    return [tuple(c / divisions for c in combo) for combo in compositions(divisions, n)]


@dataclass(slots=True, frozen=True)
class GridRow:
    weights: tuple[float, ...]
    scores: ScoreVector
    aggregate: float

    def to_dict(self) -> dict[str, Any]:
        return {"weights": list(self.weights), "scores": self.scores.to_dict(), "aggregate": self.aggregate}


@dataclass(slots=True, frozen=True)
class GridResult:
    """Grid search outcome: best lattice point and the full score table."""

    step: float
    density: float
    best_weights: tuple[float, ...]
    best_model: SimModel
    best_score: float
    table: tuple[GridRow, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "grid_step": self.step,
            "density": self.density,
            "best_weights": list(self.best_weights),
            "best_score": self.best_score,
            "best_model": self.best_model.to_dict(),
            "table": [r.to_dict() for r in self.table],
        }


ModelScorer = Callable[[SimModel], tuple[ScoreVector, float]]


def grid_search_ties(
    base: SimModel,
    specialists: Sequence[SimModel],
    step: float,
    density: float,
    score: ModelScorer,
    *,
    parallelism: int = 1,
) -> GridResult:
    """TIES-merge specialists at every simplex lattice weight and keep the best.

    Args:
        base: Shared base model
        specialists: At least two fine-tuned models
        step: Lattice step; must divide 1
        density: TIES density
        score: Validation scorer of a merged model
        parallelism: Concurrent lattice evaluations

    Returns:
        Best weights (earliest lexicographically on ties), its model, and the table
    """
    if len(specialists) < 2:
        raise ConfigError(f"Grid search needs at least 2 specialists, got {len(specialists)}")
    lattice = simplex_lattice(len(specialists), step)
    if not lattice:
        raise ConfigError("Empty weight grid")

    def evaluate_point(weights: tuple[float, ...]) -> tuple[GridRow, SimModel]:
        merged = ties_merge(base, specialists, MergeSpec(weights, density))
        scores, value = score(merged)
        return GridRow(weights=weights, scores=scores, aggregate=value), merged

    evaluated = _map_ordered(evaluate_point, lattice, parallelism)
    best_row, best_model = evaluated[0]
    for row, model in evaluated[1:]:
        if row.aggregate > best_row.aggregate:
            best_row, best_model = row, model

    logger.info("Grid search over %d points: best %s -> %.4f", len(lattice), best_row.weights, best_row.aggregate)
    return GridResult(
        step=step,
        density=density,
        best_weights=best_row.weights,
        best_model=best_model,
        best_score=best_row.aggregate,
        table=tuple(row for row, _ in evaluated),
    )


def grid_search_from_config(
    config: RunConfig,
    *,
    step: float = DEFAULT_GRID_STEP,
    specialists: Sequence[str] | None = None,
) -> GridResult:
    """Grid search over the config's initial models onto its first base model.

    Specialists default to every initial ``models`` entry that differs from the base.
    """
    objects = initial_objects(config)
    bases = [p for k, _, p in objects if k == "base_models"]
    densities = [p for k, _, p in objects if k == "ties_density"]
    if not bases or not isinstance(bases[0], SimModel):
        raise ConfigError("Grid search needs a simulated base model under 'base_models'")
    base = bases[0]
    models = {label: p for k, label, p in objects if k == "models"}
    if specialists is None:
        chosen = [p for p in models.values() if isinstance(p, SimModel) and not (p.skills == base.skills).all()]
    else:
        missing = [s for s in specialists if s not in models]
        if missing:
            raise UnknownObjectError(f"Unknown specialist labels {missing}")
        chosen = [models[s] for s in specialists]
    if not all(isinstance(m, SimModel) for m in chosen):
        raise ConfigError("Grid search needs simulated specialist models")
    density = float(densities[0]) if densities else 0.5

    scorer = Scorer(config)

    def score(model: SimModel) -> tuple[ScoreVector, float]:
        entry = ObjectEntry(id="grid", kind="models", label="grid", payload=model, provenance="grid")
        return scorer(ModelArtifact(object=entry, step=0, index=0))

    return grid_search_ties(base, chosen, step, density, score, parallelism=config.parallelism)


def run_random_baseline(
    config: RunConfig,
    *,
    trace_path: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
) -> RunState:
    """Run the loop with uniform random selection: no agent calls, no memory."""
    return run(
        config.with_overrides(controller=RANDOM_CONTROLLER),
        trace_path=trace_path,
        checkpoint_path=checkpoint_path,
    )


class OneStepLookahead:
    """Chooser returning the candidate with the best immediate validation score.

    Ties go to the earliest candidate in enumeration order.
    """

    def __init__(self, orchestrator: Orchestrator) -> None:
        self.orchestrator = orchestrator

    def __call__(self) -> tuple[str, tuple[str, ...]]:
        orchestrator = self.orchestrator
        best: ActionCandidate | None = None
        best_score = float("-inf")
        for candidate in orchestrator.candidates():
            value = orchestrator.preview(candidate)
            if value > best_score:
                best, best_score = candidate, value
        if best is None:
            raise ConfigError("No candidates to look ahead over")
        return best.schema, best.labels(orchestrator.state.registry)
