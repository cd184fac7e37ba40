"""Task scoring and multi-task score aggregation."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import StrEnum
from typing import Any, Protocol

import numpy as np

from .exceptions import ConfigError, EvaluationError, EvaluationParameterError, SearchError
from .executor.shell import shell_execute
from .executor.sim import SimModel
from .logging import get_logger
from .registry import ModelArtifact

logger = get_logger(__name__)

VALIDATION_SPLIT = "validation"
TEST_SPLIT = "test"

# Maximum attainable value per metric identifier.
METRIC_MAX_VALUES: dict[str, float] = {
    "acc": 1.0,
    "accuracy": 1.0,
    "em": 1.0,
    "exact_match": 1.0,
    "f1": 1.0,
    "mt_bench": 10.0,
    "score10": 10.0,
}


class AggregationRule(StrEnum):
    WEIGHTED_SUM = "weighted_sum"
    MEAN = "mean"


@dataclass(slots=True, frozen=True)
class TaskSpec:
    """A scored task: metric, its maximum, and aggregation weight."""

    name: str
    metric: str
    max_value: float = 1.0
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.max_value <= 0:
            raise EvaluationParameterError(
                f"Task {self.name!r} max value must be positive, got {self.max_value}"
            )


@dataclass(slots=True, frozen=True)
class ScoreVector:
    """Per-task scores in task order."""

    values: tuple[tuple[str, float], ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.values)

    def as_array(self) -> np.ndarray:
        return np.array([v for _, v in self.values], dtype=np.float64)

    def to_dict(self) -> dict[str, float]:
        return dict(self.values)

    def __len__(self) -> int:
        return len(self.values)


def derive_weights(tasks: Sequence[tuple[str, float]]) -> list[float]:
    """Weights giving every task the same maximum contribution of 1.

    Args:
        tasks: (name, max value) pairs

    Returns:
        1 / max value per task

    Raises:
        EvaluationParameterError: If any max value is not positive
    """
    weights = []
    for name, max_value in tasks:
        if max_value <= 0:
            raise EvaluationParameterError(f"Task {name!r} has nonpositive max {max_value}")
        weights.append(1.0 / max_value)
    return weights


def aggregate(
    scores: ScoreVector | Sequence[float],
    weights: Sequence[float],
    rule: AggregationRule | str = AggregationRule.MEAN,
) -> float:
    """Combine per-task scores into one value.

    ``weighted_sum`` is the plain weighted sum; ``mean`` divides it by the sum
    of weights, keeping the result on a 0-1 scale.
    """
    values = [v for _, v in scores.values] if isinstance(scores, ScoreVector) else list(scores)
    if len(values) != len(weights):
        raise EvaluationParameterError(
            f"{len(values)} scores for {len(weights)} weights"
        )
    total = math.fsum(w * s for w, s in zip(weights, values, strict=True))
    match AggregationRule(rule):
        case AggregationRule.WEIGHTED_SUM:
            return total
        case AggregationRule.MEAN:
            norm = math.fsum(weights)
            if norm <= 0:
                raise EvaluationParameterError("Weights must have a positive sum")
            return total / norm


def make_tasks(
    eval_tasks: Sequence[Sequence[str]],
    max_values: Mapping[str, float] | None = None,
) -> list[TaskSpec]:
    """Build task specs from config ``[name, metric]`` pairs with derived weights."""
    max_values = max_values or {}
    pairs = []
    for entry in eval_tasks:
        if len(entry) != 2:
            raise ConfigError(f"Task entry must be [name, metric], got {entry!r}")
        name, metric = str(entry[0]), str(entry[1])
        if name in max_values:
            max_value = float(max_values[name])
        elif metric in METRIC_MAX_VALUES:
            max_value = METRIC_MAX_VALUES[metric]
        else:
            raise ConfigError(f"Task {name!r}: unknown metric {metric!r} and no max value")
        pairs.append((name, metric, max_value))
    weights = derive_weights([(n, m) for n, _, m in pairs])
    return [
        TaskSpec(name=n, metric=metric, max_value=m, weight=w)
        for (n, metric, m), w in zip(pairs, weights, strict=True)
    ]


class Evaluator(Protocol):
    """Scores one model on one task."""

    def score(self, model: ModelArtifact, task: TaskSpec, split: str) -> float:
        ...


class SimulatedEvaluator:
    """Task score = clamp(skill, 0, 1) * max value, on a fixed skill index.

    Test-split scores add a per-task offset before clamping, standing in for a
    held-out split that differs from validation.
    """

    def __init__(
        self, task_skills: Mapping[str, int], test_offsets: Mapping[str, float] | None = None
    ) -> None:
        self.task_skills = dict(task_skills)
        self.test_offsets = dict(test_offsets or {})

    def score(self, model: ModelArtifact, task: TaskSpec, split: str) -> float:
        payload = model.object.payload
        if not isinstance(payload, SimModel):
            raise EvaluationError(f"{model.label} is not a simulated model")
        if task.name not in self.task_skills:
            raise EvaluationError(f"No skill mapped for task {task.name!r}")
        index = self.task_skills[task.name]
        if not 0 <= index < payload.dimension:
            raise EvaluationError(f"Task {task.name!r} skill {index} out of range")
        value = float(payload.skills[index])
        if split == TEST_SPLIT:
            value += self.test_offsets.get(task.name, 0.0)
        return min(max(value, 0.0), 1.0) * task.max_value


class TableEvaluator:
    """Looks scores up by model label, per split."""

    def __init__(self, table: Mapping[str, Mapping[str, Any]]) -> None:
        self.table = table

    def score(self, model: ModelArtifact, task: TaskSpec, split: str) -> float:
        row = self.table.get(model.label)
        if row is None:
            raise EvaluationError(f"No scores recorded for {model.label}")
        value = row.get(task.name)
        if isinstance(value, Mapping):
            value = value.get(split)
        if value is None:
            raise EvaluationError(f"No {split} score for {model.label} on {task.name}")
        return float(value)


class ShellEvaluator:
    """Runs an external scorer; the last stdout line is the score."""

    def __init__(self, command: str, *, timeout: float = 3600.0) -> None:
        self.command = command
        self.timeout = timeout

    def score(self, model: ModelArtifact, task: TaskSpec, split: str) -> float:
        result = shell_execute(
            self.command,
            {"model": model.object.payload, "task": task.name, "split": split},
            timeout=self.timeout,
            require_output=False,
        )
        lines = result.stdout.strip().splitlines()
        try:
            return float(lines[-1])
        except (IndexError, ValueError) as e:
            raise EvaluationError(f"Scorer printed no number for {task.name}") from e


def _score_one(
    evaluator: Evaluator, model: ModelArtifact, task: TaskSpec, split: str
) -> float:
    try:
        value = float(evaluator.score(model, task, split))
    except SearchError:
        raise
    except Exception as e:
        logger.exception("Evaluator failed on %s/%s", model.label, task.name)
        raise EvaluationError(f"Evaluator failed on {task.name}: {e}") from e
    if not 0.0 <= value <= task.max_value:
        raise EvaluationError(
            f"{task.name} score {value} outside [0, {task.max_value}] for {model.label}"
        )
    return value


def evaluate(
    model: ModelArtifact,
    tasks: Sequence[TaskSpec],
    evaluators: Mapping[str, Evaluator],
    *,
    split: str = VALIDATION_SPLIT,
    parallelism: int = 1,
) -> ScoreVector:
    """Score a model on every task.

    Args:
        model: Model to score
        tasks: Tasks in order
        evaluators: Task name to evaluator
        split: "validation" during search, "test" for reports
        parallelism: Concurrent task evaluations

    Returns:
        Scores in task order

    Raises:
        EvaluationError: Unbound task or evaluator failure
    """
    unbound = [t.name for t in tasks if t.name not in evaluators]
    if unbound:
        raise EvaluationError(f"No evaluator bound for tasks {unbound}")

    if parallelism > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [
                pool.submit(_score_one, evaluators[t.name], model, t, split) for t in tasks
            ]
            values = [f.result() for f in futures]
    else:
        values = [_score_one(evaluators[t.name], model, t, split) for t in tasks]

    return ScoreVector(tuple((t.name, v) for t, v in zip(tasks, values, strict=True)))
