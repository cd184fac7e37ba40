"""Unit tests for agent output parsing."""

import pytest

from posttrain_search.exceptions import SelectionError, SelectionParseError
from posttrain_search.policy import (
    format_object_selection,
    format_type_selection,
    parse_object_selection,
    parse_type_selection,
)


@pytest.mark.phase2
@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("After some analysis, SFT looks best.\nSelected Action Type NUMBER: 1", 1),
        ("I choose 0", 0),
        ("Options 0 and 1 look close; final answer 1", 1),
        ("The 0--1--0 model improved, so pick 0", 0),
        ("lr 1e-06 worked; score 0.5; choose 1", 1),
    ],
)
def test_parse_type_selection(text: str, expected: int) -> None:
    """Test the last standalone integer is the selected type."""
    assert parse_type_selection(text, 2) == expected


@pytest.mark.phase2
def test_parse_type_selection_out_of_range() -> None:
    """Test a number outside the presented list is a parse error."""
    with pytest.raises(SelectionParseError) as exc_info:
        parse_type_selection("NUMBER: 7", 2)
    assert exc_info.value.text == "NUMBER: 7"


@pytest.mark.phase2
def test_parse_type_selection_without_number() -> None:
    """Test text without an integer is a parse error."""
    with pytest.raises(SelectionParseError):
        parse_type_selection("no idea", 2)


@pytest.mark.phase2
def test_parse_object_selection() -> None:
    """Test the last [[ ]] group gives one index per slot."""
    assert parse_object_selection("reasoning...[[1, 0, 2]]", [3, 2, 4]) == [1, 0, 2]
    assert parse_object_selection("[[0]]", [1]) == [0]
    assert parse_object_selection("first [[0, 0, 0]] then [[2, 1, 3]]", [3, 2, 4]) == [2, 1, 3]


@pytest.mark.phase2
def test_parse_object_selection_arity() -> None:
    """Test a group with the wrong number of indices is rejected."""
    with pytest.raises(SelectionParseError):
        parse_object_selection("[[1, 0]]", [3, 2, 4])


@pytest.mark.phase2
def test_parse_object_selection_range() -> None:
    """Test out-of-range and negative indices are rejected."""
    with pytest.raises(SelectionParseError):
        parse_object_selection("[[3, 0]]", [3, 2])
    with pytest.raises(SelectionParseError):
        parse_object_selection("[[-1, 0]]", [3, 2])
    with pytest.raises(SelectionParseError):
        parse_object_selection("1, 0", [3, 2])


@pytest.mark.phase2
def test_parse_error_is_selection_error() -> None:
    """Test parse errors are selection errors."""
    assert issubclass(SelectionParseError, SelectionError)


@pytest.mark.phase2
def test_formatted_answers_parse_back() -> None:
    """Test formatted answers are read back by the parsers."""
    assert parse_type_selection(format_type_selection(1), 2) == 1
    assert parse_object_selection(format_object_selection([2, 0, 1]), [3, 1, 2]) == [2, 0, 1]


@pytest.mark.phase2
@pytest.mark.parametrize(
    "text",
    [
        "",
        "no idea",
        "NUMBER: 2",
        "NUMBER: -1",
        "a weight of 0.5",
        "lr 1e-06",
        "0--1--0",
        "model_1",
        "step1",
        "NUMBER: 12",
    ],
)
def test_malformed_type_selection_never_selects(text: str) -> None:
    """Test malformed type answers raise instead of picking a type."""
    with pytest.raises(SelectionParseError):
        parse_type_selection(text, 2)


@pytest.mark.phase2
@pytest.mark.parametrize(
    "text",
    [
        "[[1, 0]]",
        "[[1, 0, 2, 0]]",
        "[[3, 0, 0]]",
        "[[0, 2, 0]]",
        "[[0, 0, 4]]",
        "[[-1, 0, 0]]",
        "[1, 0, 2]",
        "[[1; 0; 2]]",
        "[[a, b, c]]",
        "[[1, 0, 2]] then [[9, 9, 9]]",
        "[[]]",
        "[[1.0, 0, 2]]",
    ],
)
def test_malformed_object_selection_never_selects(text: str) -> None:
    """Test malformed object answers raise instead of picking objects."""
    with pytest.raises(SelectionParseError):
        parse_object_selection(text, [3, 2, 4])
