"""Simulated model space: skill vectors, datasets and SFT dynamics."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from ..exceptions import ExecutorParameterError
from ..logging import get_logger
from .base import ExecutionContext, ExecutorBinding, ExecutorSpec, SimParams
from .registry import EXECUTORS, ExecutorKind

logger = get_logger(__name__)

FloatArray = npt.NDArray[np.float64]


def _frozen_vector(values: Any, name: str) -> FloatArray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1 or arr.size == 0:
        raise ExecutorParameterError(f"{name} must be a nonempty 1-D vector")
    arr.setflags(write=False)
    return arr


@dataclass(slots=True, frozen=True, eq=False)
class SimModel:
    """Simulated model: one proficiency value per skill."""

    skills: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "skills", _frozen_vector(self.skills, "skills"))

    @property
    def dimension(self) -> int:
        return int(self.skills.size)

    @classmethod
    def zeros(cls, dimension: int) -> SimModel:
        return cls(np.zeros(dimension))

    def to_dict(self) -> dict[str, Any]:
        return {"skills": self.skills.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimModel:
        return cls(np.asarray(data["skills"], dtype=np.float64))


@dataclass(slots=True, frozen=True, eq=False)
class SimDataset:
    """Simulated SFT data: attainable targets, covered skills, example count."""

    targets: FloatArray
    coverage: npt.NDArray[np.bool_]
    examples: int

    def __post_init__(self) -> None:
        targets = _frozen_vector(self.targets, "targets")
        if np.any(targets < 0.0) or np.any(targets > 1.0):
            raise ExecutorParameterError("Dataset targets must lie in [0, 1]")
        coverage = np.array(self.coverage, copy=True)
        if coverage.shape != targets.shape:
            raise ExecutorParameterError("Dataset coverage and targets differ in length")
        if not np.all(np.isin(coverage, (0, 1))):
            raise ExecutorParameterError("Dataset coverage must be a 0/1 mask")
        coverage = coverage.astype(bool)
        if not coverage.any():
            raise ExecutorParameterError("Dataset must cover at least one skill")
        coverage.setflags(write=False)
        if int(self.examples) <= 0:
            raise ExecutorParameterError(f"Dataset needs a positive example count, got {self.examples}")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "coverage", coverage)
        object.__setattr__(self, "examples", int(self.examples))

    @property
    def dimension(self) -> int:
        return int(self.targets.size)

    def scaled(self, factor: float) -> SimDataset:
        """Same data with the example count multiplied by ``factor``."""
        if factor <= 0:
            raise ExecutorParameterError(f"Scale factor must be positive, got {factor}")
        return SimDataset(self.targets, self.coverage, max(1, round(self.examples * factor)))

    @classmethod
    def mixture(cls, datasets: Sequence[SimDataset]) -> SimDataset:
        """Aggregate datasets: max covered target per skill, union coverage, summed size."""
        if not datasets:
            raise ExecutorParameterError("Mixture needs at least one dataset")
        _check_dimensions(d.dimension for d in datasets)
        targets = np.max([np.where(d.coverage, d.targets, 0.0) for d in datasets], axis=0)
        coverage = np.any([d.coverage for d in datasets], axis=0)
        return cls(targets, coverage, sum(d.examples for d in datasets))

    def to_dict(self) -> dict[str, Any]:
        return {
            "targets": self.targets.tolist(),
            "coverage": [int(c) for c in self.coverage],
            "examples": self.examples,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimDataset:
        return cls(
            np.asarray(data["targets"], dtype=np.float64),
            np.asarray(data["coverage"]),
            int(data["examples"]),
        )


def _check_dimensions(dimensions: Any) -> int:
    dims = set(dimensions)
    if len(dims) != 1:
        raise ExecutorParameterError(f"Dimension mismatch: {sorted(dims)}")
    return dims.pop()


def learning_strength(lr: float, examples: int, params: SimParams) -> float:
    """Per-step learning strength, saturating at 1."""
    if lr <= 0:
        raise ExecutorParameterError(f"Learning rate must be positive, got {lr}")
    return min(1.0, (lr / params.lr_ref) * (1.0 - math.exp(-examples / params.n0)))


def sim_sft(
    model: SimModel, data: SimDataset, lr: float, params: SimParams | None = None
) -> SimModel:
    """Simulated fine-tuning step.

    Covered skills move toward the dataset target by the learning strength;
    uncovered skills decay by ``phi`` times it. The input is not modified.

    Args:
        model: Model to train
        data: Training data
        lr: Learning rate (> 0)
        params: Dynamics constants

    Returns:
        New trained model
    """
    params = params or SimParams()
    _check_dimensions((model.dimension, data.dimension))
    eta = learning_strength(lr, data.examples, params)
    s = model.skills
    updated = np.where(
        data.coverage, s + eta * (data.targets - s), s * (1.0 - params.phi * eta)
    )
    return SimModel(updated)


def encode_payload(payload: Any) -> Any:
    """Encode a registry payload for checkpoints."""
    if isinstance(payload, SimModel):
        return {"sim_model": payload.to_dict()}
    if isinstance(payload, SimDataset):
        return {"sim_dataset": payload.to_dict()}
    if isinstance(payload, tuple):
        return {"tuple": list(payload)}
    return payload


def decode_payload(data: Any) -> Any:
    if isinstance(data, dict):
        if "sim_model" in data:
            return SimModel.from_dict(data["sim_model"])
        if "sim_dataset" in data:
            return SimDataset.from_dict(data["sim_dataset"])
        if "tuple" in data:
            return tuple(data["tuple"])
    return data


def _expect(inputs: Mapping[str, Any], role: str, kind: type) -> Any:
    value = inputs.get(role)
    if not isinstance(value, kind):
        raise ExecutorParameterError(
            f"Role {role!r} needs a {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _run_sim_sft(
    binding: ExecutorBinding, inputs: Mapping[str, Any], context: ExecutionContext
) -> SimModel:
    model = _expect(inputs, "model", SimModel)
    data = _expect(inputs, "dataset", SimDataset)
    lr = inputs.get("lr")
    if not isinstance(lr, (int, float)):
        raise ExecutorParameterError(f"Role 'lr' needs a number, got {lr!r}")
    logger.debug("sim_sft %s: n=%d lr=%g", context.label, data.examples, lr)
    return sim_sft(model, data, float(lr), context.params)


EXECUTORS[ExecutorKind.SIM_SFT] = ExecutorSpec(
    run=_run_sim_sft,
    required_roles=("model", "dataset", "lr"),
    description="simulated supervised fine-tuning",
)
