"""TIES merging: trim, elect sign, disjoint merge."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from ..exceptions import ExecutorParameterError
from ..logging import get_logger
from .base import ExecutionContext, ExecutorBinding, ExecutorSpec
from .registry import EXECUTORS, ExecutorKind
from .sim import SimModel

logger = get_logger(__name__)

FloatArray = npt.NDArray[np.float64]


@dataclass(slots=True, frozen=True)
class MergeSpec:
    """Per-model merge weights and the kept fraction of each task vector."""

    weights: tuple[float, ...]
    density: float

    def __post_init__(self) -> None:
        weights = tuple(float(w) for w in self.weights)
        if not weights or any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ExecutorParameterError(
                f"Merge weights must be nonnegative with a positive sum, got {weights}"
            )
        if not 0.0 <= self.density <= 1.0:
            raise ExecutorParameterError(f"Density must be in [0, 1], got {self.density}")
        object.__setattr__(self, "weights", weights)


def trim_count(density: float, dimension: int) -> int:
    """Number of coordinates kept per task vector: ceil(density * K)."""
    return math.ceil(round(density * dimension, 9))


def trim(task_vectors: FloatArray, density: float) -> FloatArray:
    """Keep the largest-magnitude coordinates of each row, lower index first on ties."""
    keep = trim_count(density, task_vectors.shape[1])
    trimmed = np.zeros_like(task_vectors)
    if keep == 0:
        return trimmed
    order = np.argsort(-np.abs(task_vectors), axis=1, kind="stable")[:, :keep]
    rows = np.arange(task_vectors.shape[0])[:, None]
    trimmed[rows, order] = task_vectors[rows, order]
    return trimmed


def elect_signs(trimmed: FloatArray, weights: FloatArray) -> FloatArray:
    """Sign of the weighted sum per coordinate; 0 where it sums to 0."""
    return np.sign(np.sum(weights[:, None] * trimmed, axis=0))


def disjoint_merge(trimmed: FloatArray, weights: FloatArray, signs: FloatArray) -> FloatArray:
    """Weighted mean over models whose trimmed value agrees with the elected sign."""
    agree = (np.sign(trimmed) == signs[None, :]) & (signs[None, :] != 0)
    w = weights[:, None] * agree
    numerator = np.sum(w * trimmed, axis=0)
    denominator = np.sum(w, axis=0)
    return np.divide(
        numerator, denominator, out=np.zeros_like(numerator), where=denominator > 0
    )


def ties_merge_vectors(
    base: FloatArray, models: Sequence[FloatArray], spec: MergeSpec
) -> FloatArray:
    """TIES merge on raw parameter vectors.

    Args:
        base: Base parameters (K,)
        models: Parameters of at least two fine-tuned models, each (K,)
        spec: Weights (one per model) and density

    Returns:
        base + merged task vector
    """
    if len(models) < 2:
        raise ExecutorParameterError(f"TIES needs at least 2 models, got {len(models)}")
    if len(spec.weights) != len(models):
        raise ExecutorParameterError(
            f"{len(spec.weights)} merge weights for {len(models)} models"
        )
    base = np.asarray(base, dtype=np.float64)
    vectors = [np.asarray(m, dtype=np.float64) for m in models]
    mismatched = [v.shape for v in vectors if v.shape != base.shape]
    if mismatched:
        raise ExecutorParameterError(
            f"Dimension mismatch: base {base.shape}, models {mismatched}"
        )
    stacked = np.stack(vectors)

    weights = np.asarray(spec.weights, dtype=np.float64)
    trimmed = trim(stacked - base, spec.density)
    signs = elect_signs(trimmed, weights)
    merged: FloatArray = base + disjoint_merge(trimmed, weights, signs)
    return merged


def ties_merge(base: SimModel, models: Sequence[SimModel], spec: MergeSpec) -> SimModel:
    """TIES-merge simulated models onto a base."""
    return SimModel(ties_merge_vectors(base.skills, [m.skills for m in models], spec))


def _run_sim_ties(
    binding: ExecutorBinding, inputs: Mapping[str, Any], context: ExecutionContext
) -> SimModel:
    base = inputs.get("base")
    models = [inputs[r] for r in binding.roles if r.startswith("model")]
    if not isinstance(base, SimModel) or not all(isinstance(m, SimModel) for m in models):
        raise ExecutorParameterError("sim_ties needs simulated base and model payloads")
    weights = inputs.get("weights")
    density = inputs.get("density")
    if not isinstance(weights, (list, tuple)) or not isinstance(density, (int, float)):
        raise ExecutorParameterError(
            f"sim_ties needs a weight tuple and a density, got {weights!r}, {density!r}"
        )
    spec = MergeSpec(tuple(weights), float(density))
    logger.debug("sim_ties %s: weights=%s density=%g", context.label, spec.weights, spec.density)
    return ties_merge(base, models, spec)


EXECUTORS[ExecutorKind.SIM_TIES] = ExecutorSpec(
    run=_run_sim_ties,
    required_roles=("base", "model", "model2", "weights", "density"),
    description="TIES merging of simulated models",
)
