"""Unit tests for selection policies."""

import math
from typing import Any

import numpy as np
import pytest

from posttrain_search.actions import enumerate_candidates
from posttrain_search.agent import Phase, ScriptedAgent
from posttrain_search.config import build_registry, parse_config
from posttrain_search.exceptions import SelectionError
from posttrain_search.policy import (
    LlmPolicy,
    RandomPolicy,
    ScriptedPolicy,
    SelectionContext,
    select_action,
)
from posttrain_search.registry import Registry


@pytest.fixture
def reference(reference_document: Any) -> tuple[Any, Registry]:
    config = parse_config(reference_document())
    return config, build_registry(config)


def _agent(types: list[str], objects: list[str]) -> ScriptedAgent:
    return ScriptedAgent({Phase.TYPE_SELECTION: types, Phase.OBJECT_SELECTION: objects})


@pytest.mark.phase2
def test_llm_policy_two_stage_selection(reference: tuple[Any, Registry]) -> None:
    """Test "0" then "[[0, 1, 0]]" selects SFT with the second dataset."""
    config, registry = reference
    agent = _agent(["Selected Action Type NUMBER: 0"], ["Selected Object NUMBERs: [[0, 1, 0]]"])
    candidate, trace = select_action(
        LlmPolicy(agent), "", config.schemas, registry.view(), np.random.default_rng(0)
    )

    assert candidate.schema == "sft"
    assert candidate.labels(registry) == ("gemma-2-2b--gsm8k_1k", "commonsense_qa_1k", "1e-06")
    assert trace.type_index == 0
    assert trace.object_indices == (0, 1, 0)
    assert trace.candidate_count == 22
    assert not trace.fallback
    assert [c.phase for c in agent.trace] == ["type-selection", "object-selection"]


@pytest.mark.phase2
def test_llm_policy_object_prompt_lists_slot_pools(reference: tuple[Any, Registry]) -> None:
    """Test the object prompt lists every object of each slot kind."""
    config, registry = reference
    agent = _agent(["1"], ["[[0, 0, 1, 0, 0]]"])
    candidate, _ = select_action(
        LlmPolicy(agent), "keep merging", config.schemas, registry.view(), np.random.default_rng(0)
    )

    prompt = agent.trace[1].prompt
    assert "Object Type 0: base_models\n0: gemma-2-2b\n\n" in prompt
    assert "Object Type 1: models\n0: gemma-2-2b--gsm8k_1k\n" in prompt
    assert "Object Type 3: ties_weights\n0: [0.5, 0.5]\n\n" in prompt
    assert "keep merging" in prompt
    assert candidate.schema == "ties_merging"


@pytest.mark.phase2
def test_llm_policy_collapses_reversed_pair(reference: tuple[Any, Registry]) -> None:
    """Test a reversed symmetric merge pair resolves to the enumerated candidate."""
    config, registry = reference
    agent = _agent(["1"], ["[[0, 2, 1, 0, 0]]"])
    candidate, trace = select_action(
        LlmPolicy(agent), "", config.schemas, registry.view(), np.random.default_rng(0)
    )

    labels = candidate.labels(registry)
    assert labels[1:3] == ("gemma-2-2b--commonsense_qa_1k", "gemma-2-2b--trivia_qa_1k_w_context")
    assert trace.object_indices == (0, 1, 2, 0, 0)
    assert not trace.fallback


@pytest.mark.phase2
def test_llm_policy_self_pair_is_rejected_then_retried(reference: tuple[Any, Registry]) -> None:
    """Test a self-pair is not a candidate and triggers a retry."""
    config, registry = reference
    agent = _agent(["1"], ["[[0, 1, 1, 0, 0]]", "[[0, 0, 3, 0, 0]]"])
    candidate, trace = select_action(
        LlmPolicy(agent), "", config.schemas, registry.view(), np.random.default_rng(0)
    )

    assert candidate.labels(registry)[1:3] == ("gemma-2-2b--gsm8k_1k", "gemma-2-2b")
    assert trace.retries == 1
    assert agent.trace[2].retry


@pytest.mark.phase2
def test_llm_policy_retries_type_parse(reference: tuple[Any, Registry]) -> None:
    """Test a type parse failure is retried with the same prompt."""
    config, registry = reference
    agent = _agent(["no number here", "0"], ["[[0, 1, 0]]"])
    _, trace = select_action(
        LlmPolicy(agent), "", config.schemas, registry.view(), np.random.default_rng(0)
    )

    assert trace.retries == 1
    assert len(trace.raw_texts) == 3
    assert agent.trace[0].prompt == agent.trace[1].prompt
    assert [c.retry for c in agent.trace] == [False, True, False]


@pytest.mark.phase2
def test_llm_policy_falls_back_after_type_retries(reference: tuple[Any, Registry]) -> None:
    """Test exhausting type retries falls back to a flagged random choice."""
    config, registry = reference
    agent = _agent(["??"] * 3, [])
    candidate, trace = select_action(
        LlmPolicy(agent, max_parse_retries=2),
        "",
        config.schemas,
        registry.view(),
        np.random.default_rng(0),
    )

    assert trace.fallback
    assert trace.retries == 2
    assert candidate in enumerate_candidates(config.schemas, registry.view())
    assert len(agent.trace) == 3


@pytest.mark.phase2
def test_llm_policy_object_fallback_stays_in_type(reference: tuple[Any, Registry]) -> None:
    """Test exhausting object retries falls back within the chosen type."""
    config, registry = reference
    agent = _agent(["1"], ["[[9, 9, 9, 9, 9]]"] * 2)
    candidate, trace = select_action(
        LlmPolicy(agent, max_parse_retries=1),
        "",
        config.schemas,
        registry.view(),
        np.random.default_rng(0),
    )

    assert trace.fallback
    assert candidate.schema == "ties_merging"


@pytest.mark.phase2
def test_random_policy_is_seeded(reference: tuple[Any, Registry]) -> None:
    """Test a fixed seed gives the same choice across runs."""
    config, registry = reference
    picks = [
        select_action(RandomPolicy(), "", config.schemas, registry.view(), np.random.default_rng(11))[0]
        for _ in range(3)
    ]
    assert picks[0] == picks[1] == picks[2]


@pytest.mark.phase2
def test_random_policy_is_uniform_over_flat_candidates(reference: tuple[Any, Registry]) -> None:
    """Test merges are drawn with probability 6/22, not 1/2."""
    config, registry = reference
    candidates = enumerate_candidates(config.schemas, registry.view())
    context = SelectionContext(
        memory="",
        schemas=config.schemas,
        pool=registry.view(),
        candidates=candidates,
        step=1,
        rng=np.random.default_rng(2024),
    )
    policy = RandomPolicy()
    draws = 10_000
    merges = sum(policy.select(context)[0].schema == "ties_merging" for _ in range(draws))

    p = 6 / 22
    sigma = math.sqrt(p * (1 - p) / draws)
    assert abs(merges / draws - p) < 3 * sigma


@pytest.mark.phase2
def test_scripted_policy_follows_sequence(landscape_config: Any) -> None:
    """Test the scripted policy pops labelled actions in order."""
    registry = build_registry(landscape_config)
    policy = ScriptedPolicy([("sft", ("base", "B", "1e-05")), ("sft", ("base", "A", "1e-05"))])
    rng = np.random.default_rng(0)

    first, _ = select_action(policy, "", landscape_config.schemas, registry.view(), rng)
    second, _ = select_action(policy, "", landscape_config.schemas, registry.view(), rng)
    assert first.labels(registry) == ("base", "B", "1e-05")
    assert second.labels(registry) == ("base", "A", "1e-05")

    with pytest.raises(SelectionError):
        select_action(policy, "", landscape_config.schemas, registry.view(), rng)


@pytest.mark.phase2
def test_scripted_policy_rejects_unknown_label(landscape_config: Any) -> None:
    """Test scripted labels must exist in the pool."""
    registry = build_registry(landscape_config)
    policy = ScriptedPolicy([("sft", ("base", "Z", "1e-05"))])
    with pytest.raises(SelectionError):
        select_action(policy, "", landscape_config.schemas, registry.view(), np.random.default_rng(0))


@pytest.mark.phase2
def test_no_candidates_is_an_error(landscape_config: Any) -> None:
    """Test selection over an empty candidate set raises."""
    registry = Registry()
    registry.register_object("models", "base", None)
    with pytest.raises(SelectionError):
        select_action(RandomPolicy(), "", landscape_config.schemas, registry.view(), np.random.default_rng(0))
