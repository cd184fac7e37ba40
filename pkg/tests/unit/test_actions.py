"""Unit tests for action schemas and candidate enumeration."""

from typing import Any

import numpy as np
import pytest

from posttrain_search.actions import (
    ActionCandidate,
    ActionSchema,
    PairMode,
    count_candidates,
    enumerate_candidates,
    schemas_from_mapping,
)
from posttrain_search.config import build_registry, parse_config
from posttrain_search.exceptions import ConfigError
from posttrain_search.registry import Registry

SFT = ActionSchema("sft", ("models", "sft_dataset", "sft_lr"))
TIES = ActionSchema(
    "ties_merging", ("base_models", "models", "models", "ties_weights", "ties_density")
)


def _pool(**kinds: list[Any]) -> Registry:
    registry = Registry()
    for kind, values in kinds.items():
        for value in values:
            label = value if isinstance(value, str) else str(value)
            registry.register_object(kind, label, value)
    return registry


@pytest.mark.phase1
def test_schema_validation() -> None:
    """Test schemas need a name and nonempty slot kinds."""
    with pytest.raises(ConfigError):
        ActionSchema("", ("models",))
    with pytest.raises(ConfigError):
        ActionSchema("sft", ())
    assert TIES.repeated_kinds == {"models": (1, 2)}
    assert SFT.repeated_kinds == {}


@pytest.mark.phase1
def test_sft_enumeration_in_registration_order() -> None:
    """Test (Gemma2 2B, GSM8k) and (Gemma2 2B, MATH) are the SFT candidates."""
    registry = _pool(models=["gemma-2-2b"], sft_dataset=["gsm8k", "math"], sft_lr=[1e-6])
    candidates = enumerate_candidates([SFT], registry.view())
    assert [c.labels(registry) for c in candidates] == [
        ("gemma-2-2b", "gsm8k", "1e-06"),
        ("gemma-2-2b", "math", "1e-06"),
    ]


@pytest.mark.phase1
def test_empty_slot_kind_gives_no_candidates() -> None:
    """Test a schema with an empty slot kind contributes nothing."""
    registry = _pool(models=["m"], sft_lr=[1e-6])
    assert enumerate_candidates([SFT], registry.view()) == []


@pytest.mark.phase1
def test_ties_enumerates_unordered_pairs() -> None:
    """Test 3 models give the 3 unordered pairs without self-pairs."""
    registry = _pool(
        base_models=["base"],
        models=["A", "B", "C"],
        ties_weights=[(0.5, 0.5)],
        ties_density=[0.5],
    )
    candidates = enumerate_candidates([TIES], registry.view())
    pairs = [c.labels(registry)[1:3] for c in candidates]
    assert pairs == [("A", "B"), ("A", "C"), ("B", "C")]


@pytest.mark.phase1
def test_asymmetric_weights_enumerate_ordered_pairs() -> None:
    """Test an asymmetric weight tuple makes the pair order matter."""
    registry = _pool(
        base_models=["base"],
        models=["A", "B", "C"],
        ties_weights=[(0.7, 0.3)],
        ties_density=[0.5],
    )
    candidates = enumerate_candidates([TIES], registry.view())
    assert len(candidates) == 6
    assert len(candidates) == count_candidates([TIES], registry.pool_sizes(), pair_mode=PairMode.ORDERED)


@pytest.mark.phase1
def test_unordered_pairs_flag_off_gives_product() -> None:
    """Test the plain Cartesian product when pair collapsing is disabled."""
    registry = _pool(
        base_models=["base"],
        models=["A", "B"],
        ties_weights=[(0.5, 0.5)],
        ties_density=[0.5],
    )
    candidates = enumerate_candidates([TIES], registry.view(), unordered_pairs=False)
    assert len(candidates) == 4
    assert count_candidates([TIES], registry.pool_sizes(), pair_mode=PairMode.PRODUCT) == 4


@pytest.mark.phase1
def test_reference_pool_has_22_candidates(reference_document: Any) -> None:
    """Test 4 models, 4 datasets, 1 lr, 1 weight, 1 density give 16 + 6."""
    config = parse_config(reference_document())
    registry = build_registry(config)
    candidates = enumerate_candidates(config.schemas, registry.view())

    assert len(candidates) == 22
    assert sum(c.schema == "sft" for c in candidates) == 16
    assert sum(c.schema == "ties_merging" for c in candidates) == 6
    assert count_candidates(config.schemas, registry.pool_sizes()) == 22


@pytest.mark.phase1
def test_one_more_model_gives_30_candidates(reference_document: Any) -> None:
    """Test m=5 gives 20 SFT and 10 merge candidates."""
    config = parse_config(reference_document())
    registry = build_registry(config)
    registry.register_model(
        step=1,
        index=0,
        payload="models/out",
        action_type="sft",
        inputs=[e.id for e in (registry.by_kind("models")[0], registry.by_kind("sft_dataset")[0], registry.by_kind("sft_lr")[0])],
    )
    candidates = enumerate_candidates(config.schemas, registry.view())
    assert len(candidates) == 30
    assert count_candidates(config.schemas, registry.pool_sizes()) == 30


@pytest.mark.phase1
def test_single_model_has_no_merge_term() -> None:
    """Test m=1 contributes no merge candidates."""
    sizes = {"models": 1, "base_models": 1, "ties_weights": 1, "ties_density": 1}
    assert count_candidates([TIES], sizes) == 0


@pytest.mark.phase1
def test_enumeration_is_deterministic_and_duplicate_free(reference_document: Any) -> None:
    """Test repeated enumeration yields the same distinct list."""
    config = parse_config(reference_document())
    registry = build_registry(config)
    first = enumerate_candidates(config.schemas, registry.view())
    second = enumerate_candidates(config.schemas, registry.view())
    assert first == second
    assert len(set(first)) == len(first)


@pytest.mark.phase1
def test_candidate_dict_conversion() -> None:
    """Test candidates convert to and from plain dicts."""
    candidate = ActionCandidate("sft", ("obj-00001", "obj-00002", "obj-00003"))
    assert ActionCandidate.from_dict(candidate.to_dict()) == candidate


@pytest.mark.phase1
def test_schemas_from_mapping_keeps_declaration_order() -> None:
    """Test schemas follow the config's action_types order."""
    schemas = schemas_from_mapping({"ties_merging": list(TIES.slots), "sft": list(SFT.slots)})
    assert [s.name for s in schemas] == ["ties_merging", "sft"]


def _brute_force(registry: Registry) -> set[tuple[str, tuple[str, ...]]]:
    view = registry.view()
    labels = {kind: [e.label for e in view.get(kind, ())] for kind in (*SFT.slots, *TIES.slots)}
    expected = set()
    for model in labels["models"]:
        for dataset in labels["sft_dataset"]:
            for lr in labels["sft_lr"]:
                expected.add(("sft", (model, dataset, lr)))
    models = labels["models"]
    for base in labels["base_models"]:
        for i in range(len(models)):
            for j in range(i + 1, len(models)):
                for weights in labels["ties_weights"]:
                    for density in labels["ties_density"]:
                        expected.add(("ties_merging", (base, models[i], models[j], weights, density)))
    return expected


@pytest.mark.phase1
def test_enumeration_matches_brute_force_on_random_pools() -> None:
    """Test enumeration and counting against nested loops on 50 random pools."""
    rng = np.random.default_rng(2024)
    for _ in range(50):
        m = int(rng.integers(0, 9))
        d = int(rng.integers(0, 7))
        registry = _pool(
            base_models=["base"],
            models=[f"m{i}" for i in range(m)],
            sft_dataset=[f"d{i}" for i in range(d)],
            sft_lr=[1e-06, 1e-05][: int(rng.integers(1, 3))],
            ties_weights=[(0.5, 0.5)],
            ties_density=[0.5, 1.0][: int(rng.integers(1, 3))],
        )
        candidates = enumerate_candidates([SFT, TIES], registry.view())
        found = [(c.schema, c.labels(registry)) for c in candidates]

        assert len(found) == len(set(found))
        assert set(found) == _brute_force(registry)
        assert count_candidates([SFT, TIES], registry.pool_sizes()) == len(found)
