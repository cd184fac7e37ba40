"""Unit tests for trial history and memory regeneration."""

import pytest

from posttrain_search.agent import Phase, ScriptedAgent
from posttrain_search.evaluation import aggregate
from posttrain_search.exceptions import SearchError
from posttrain_search.memory import (
    MemoryState,
    TrialHistory,
    TrialRecord,
    format_history,
    format_trial,
    memory_prompt,
    update_memory,
)


def _record(step: int, aggregate_score: float = 0.5057, dataset: str = "gsm8k_1k") -> TrialRecord:
    return TrialRecord(
        step=step,
        action_type="sft",
        bindings=("obj-00001", "obj-00002"),
        labels=("gemma-2-2b", dataset),
        scores=(("gsm8k", aggregate_score), ("commonsenseqa", aggregate_score)),
        aggregate=aggregate_score,
        produced_label=f"0--{step}--0",
        produced_id=f"obj-{100 + step:05d}",
    )


@pytest.mark.phase5
def test_format_trial() -> None:
    """Test one history line with the aggregate to 3 decimals."""
    assert format_trial(_record(1)) == "Step 1: sft(gemma-2-2b, gsm8k_1k) -> 0--1--0, score: 0.506"


@pytest.mark.phase5
def test_format_trial_per_task() -> None:
    """Test per-task detail is appended when requested."""
    line = format_trial(_record(2, 0.25), per_task=True)
    assert line.endswith("score: 0.250 (gsm8k: 0.250, commonsenseqa: 0.250)")


@pytest.mark.phase5
def test_format_history() -> None:
    """Test lines are rendered in step order and empty history is empty."""
    assert format_history([]) == ""
    text = format_history([_record(1), _record(2, 0.7)])
    assert text.splitlines() == [
        "Step 1: sft(gemma-2-2b, gsm8k_1k) -> 0--1--0, score: 0.506",
        "Step 2: sft(gemma-2-2b, gsm8k_1k) -> 0--2--0, score: 0.700",
    ]


@pytest.mark.phase5
def test_trial_aggregate_is_recomputable() -> None:
    """Test a record's aggregate re-derives from its scores."""
    record = _record(1, 0.4)
    assert aggregate([v for _, v in record.scores], [1.0, 1.0]) == pytest.approx(record.aggregate)


@pytest.mark.phase5
def test_history_requires_contiguous_steps() -> None:
    """Test trials must be appended as 1, 2, 3, ..."""
    history = TrialHistory([_record(1)])
    with pytest.raises(SearchError):
        history.append(_record(3))
    history.append(_record(2))
    assert [r.step for r in history] == [1, 2]
    assert history[-1].produced_label == "0--2--0"


@pytest.mark.phase5
def test_record_dict_conversion() -> None:
    """Test records convert to and from plain dicts."""
    record = _record(4, 0.61)
    assert TrialRecord.from_dict(record.to_dict()) == record
    with pytest.raises(SearchError):
        TrialRecord.from_dict({"step": 1})


@pytest.mark.phase5
def test_first_memory_prompt_uses_none_blocks() -> None:
    """Test iteration 1 shows "None" for previous results and memories."""
    prompt, truncated = memory_prompt([], [], [_record(1)])
    assert "# Previous Results\nNone\n" in prompt
    assert "# Previous Memories Aquired from Previous Trials\nNone\n" in prompt
    assert "# Newly aquired Results\nStep 1: sft(gemma-2-2b, gsm8k_1k) -> 0--1--0, score: 0.506" in prompt
    assert prompt.rstrip().endswith("Updated Memory:")
    assert not truncated


@pytest.mark.phase5
def test_memory_prompt_lists_earlier_trials_and_memories() -> None:
    """Test iteration t shows t-1 previous lines and t-1 memories, oldest first."""
    records = [_record(1), _record(2), _record(3)]
    memories = [MemoryState("first memory", 1), MemoryState("second memory", 2)]
    prompt, _ = memory_prompt(records[:2], memories, records[2:])

    previous = prompt.split("# Previous Results\n")[1].split("\n\n# Previous Memories")[0]
    assert len(previous.splitlines()) == 2
    assert "first memory\n\nsecond memory" in prompt


@pytest.mark.phase5
def test_memory_cap_keeps_latest() -> None:
    """Test a cap keeps only the most recent memories and flags truncation."""
    memories = [MemoryState(f"memory {i}", i) for i in range(1, 4)]
    prompt, truncated = memory_prompt([], memories, [_record(4)], memory_cap=1)
    assert truncated
    assert "memory 3" in prompt
    assert "memory 1" not in prompt

    prompt, truncated = memory_prompt([], memories, [_record(4)], memory_cap=0)
    assert truncated
    assert "# Previous Memories Aquired from Previous Trials\nNone\n" in prompt


@pytest.mark.phase5
def test_update_memory_returns_agent_text_verbatim() -> None:
    """Test the agent's full output becomes the new memory."""
    agent = ScriptedAgent({Phase.MEMORY_UPDATE: ["remember: merges hurt"]})
    memory = update_memory(agent, [], [], [_record(1)])

    assert memory == MemoryState("remember: merges hurt", 1)
    call = agent.trace[0]
    assert call.phase == "memory-update"
    assert call.iteration == 1
    assert "Step 1: sft" in call.prompt


@pytest.mark.phase5
def test_update_memory_needs_new_trials() -> None:
    """Test an empty new-results block is rejected."""
    agent = ScriptedAgent({Phase.MEMORY_UPDATE: ["x"]})
    with pytest.raises(ValueError):
        update_memory(agent, [], [], [])


@pytest.mark.phase5
def test_memory_state_dict_conversion() -> None:
    """Test memory states convert to and from plain dicts."""
    state = MemoryState("text", 3, truncated=True)
    assert MemoryState.from_dict(state.to_dict()) == state
