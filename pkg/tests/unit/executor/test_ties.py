"""Unit tests for TIES merging."""

import math

import numpy as np
import pytest

from posttrain_search.exceptions import ExecutorParameterError
from posttrain_search.executor import MergeSpec, SimModel, ties_merge, ties_merge_vectors
from posttrain_search.executor.ties import elect_signs, trim, trim_count

TAU1 = np.array([0.4, -0.2, 0.1, 0.0])
TAU2 = np.array([0.3, 0.5, -0.1, 0.2])
BASE = np.zeros(4)


@pytest.mark.phase6
def test_merge_example() -> None:
    """Test trim, elect and disjoint merge on two task vectors."""
    merged = ties_merge_vectors(BASE, [TAU1, TAU2], MergeSpec((0.5, 0.5), 0.5))
    assert merged == pytest.approx([0.35, 0.5, 0.0, 0.0])


@pytest.mark.phase6
def test_merge_adds_base() -> None:
    """Test the merged task vector is added back to the base."""
    base = np.full(4, 0.1)
    merged = ties_merge_vectors(base, [base + TAU1, base + TAU2], MergeSpec((0.5, 0.5), 0.5))
    assert merged == pytest.approx([0.45, 0.6, 0.1, 0.1])


@pytest.mark.phase6
def test_zero_density_returns_base() -> None:
    """Test nothing survives trimming at density 0."""
    merged = ties_merge_vectors(BASE, [TAU1, TAU2], MergeSpec((0.5, 0.5), 0.0))
    assert merged.tolist() == BASE.tolist()


@pytest.mark.phase6
def test_self_merge_is_identity() -> None:
    """Test merging a model with itself at full density returns it."""
    model = SimModel([0.3, 0.7, 0.1])
    base = SimModel([0.1, 0.2, 0.3])
    merged = ties_merge(base, [model, model], MergeSpec((0.5, 0.5), 1.0))
    assert merged.skills == pytest.approx(model.skills)


@pytest.mark.phase6
def test_trim_count_rounding() -> None:
    """Test ceil(density * K) without float noise."""
    assert trim_count(0.5, 4) == 2
    assert trim_count(0.3, 10) == 3
    assert trim_count(0.1, 3) == 1
    assert trim_count(0.0, 5) == 0


@pytest.mark.phase6
def test_trim_prefers_lower_index_on_ties() -> None:
    """Test equal magnitudes keep the earlier coordinate."""
    trimmed = trim(np.array([[0.2, -0.2, 0.2]]), 0.34)
    assert trimmed.tolist() == [[0.2, -0.2, 0.0]]


@pytest.mark.phase6
def test_elected_sign_follows_weighted_mass() -> None:
    """Test the weighted sum, not a head count, picks the sign."""
    trimmed = np.array([[0.1], [0.1], [-0.5]])
    assert elect_signs(trimmed, np.ones(3)).tolist() == [-1.0]
    assert elect_signs(np.array([[0.2], [-0.2]]), np.ones(2)).tolist() == [0.0]


@pytest.mark.phase6
def test_asymmetric_weights() -> None:
    """Test unequal weights skew the agreeing mean."""
    merged = ties_merge_vectors(np.zeros(1), [np.array([0.4]), np.array([0.2])], MergeSpec((3.0, 1.0), 1.0))
    assert merged == pytest.approx([0.35])


@pytest.mark.phase6
def test_merge_validation() -> None:
    """Test malformed merges are rejected."""
    with pytest.raises(ExecutorParameterError):
        ties_merge_vectors(BASE, [TAU1], MergeSpec((1.0,), 0.5))
    with pytest.raises(ExecutorParameterError):
        ties_merge_vectors(BASE, [TAU1, TAU2], MergeSpec((0.5, 0.3, 0.2), 0.5))
    with pytest.raises(ExecutorParameterError):
        ties_merge_vectors(np.zeros(3), [TAU1, TAU2], MergeSpec((0.5, 0.5), 0.5))
    with pytest.raises(ExecutorParameterError, match="Dimension mismatch"):
        ties_merge_vectors(BASE, [TAU1, np.zeros(3)], MergeSpec((0.5, 0.5), 0.5))
    with pytest.raises(ExecutorParameterError, match="Dimension mismatch"):
        ties_merge(SimModel(BASE), [SimModel(TAU1), SimModel([0.1, 0.2])], MergeSpec((0.5, 0.5), 0.5))
    with pytest.raises(ExecutorParameterError):
        MergeSpec((0.5, 0.5), 1.5)
    with pytest.raises(ExecutorParameterError):
        MergeSpec((-0.5, 0.5), 0.5)


def _ties_oracle(base: list[float], models: list[list[float]], weights: list[float], density: float) -> list[float]:
    """Coordinate-by-coordinate TIES with plain loops."""
    k = len(base)
    keep = math.ceil(round(density * k, 9))
    trimmed = []
    for model in models:
        tau = [m - b for m, b in zip(model, base, strict=True)]
        kept = sorted(range(k), key=lambda i: (-abs(tau[i]), i))[:keep]
        trimmed.append([tau[i] if i in kept else 0.0 for i in range(k)])

    merged = []
    for j in range(k):
        total = sum(w * t[j] for w, t in zip(weights, trimmed, strict=True))
        sign = (total > 0) - (total < 0)
        agreeing = [(w, t[j]) for w, t in zip(weights, trimmed, strict=True) if sign and (t[j] > 0) - (t[j] < 0) == sign]
        weight = sum(w for w, _ in agreeing)
        merged.append(base[j] + (sum(w * v for w, v in agreeing) / weight if weight > 0 else 0.0))
    return merged


@pytest.mark.phase6
def test_merge_matches_loop_oracle_on_random_instances() -> None:
    """Test 1,000 random merges against the per-coordinate oracle."""
    rng = np.random.default_rng(7)
    for _ in range(1000):
        k = int(rng.integers(1, 17))
        n = int(rng.integers(2, 5))
        base = rng.normal(size=k)
        models = [base + rng.normal(size=k) for _ in range(n)]
        weights = [float(w) for w in rng.uniform(0.1, 1.0, size=n)]
        density = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))

        merged = ties_merge_vectors(base, models, MergeSpec(tuple(weights), density))
        expected = _ties_oracle(base.tolist(), [m.tolist() for m in models], weights, density)
        np.testing.assert_allclose(merged, expected, rtol=1e-12, atol=1e-12)
