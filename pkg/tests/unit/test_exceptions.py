"""Unit tests for exception hierarchy."""

import pytest

from posttrain_search.exceptions import (
    AgentError,
    AgentTransportError,
    CheckpointError,
    ConfigError,
    DuplicateObjectError,
    EvaluationError,
    EvaluationParameterError,
    ExecutorError,
    ExecutorParameterError,
    ExecutorTimeoutError,
    RegistryError,
    ScriptExhaustedError,
    SearchError,
    SelectionError,
    SelectionParseError,
    StepAborted,
    UnknownObjectError,
)


@pytest.mark.phase4
def test_exception_hierarchy() -> None:
    """Test exception inheritance hierarchy."""
    for exc in (
        ConfigError,
        RegistryError,
        AgentError,
        SelectionError,
        ExecutorError,
        EvaluationError,
        CheckpointError,
        StepAborted,
    ):
        assert issubclass(exc, SearchError)

    assert issubclass(DuplicateObjectError, RegistryError)
    assert issubclass(UnknownObjectError, RegistryError)
    assert issubclass(AgentTransportError, AgentError)
    assert issubclass(ScriptExhaustedError, AgentError)
    assert issubclass(SelectionParseError, SelectionError)
    assert issubclass(ExecutorTimeoutError, ExecutorError)


@pytest.mark.phase4
def test_parameter_errors_are_value_errors() -> None:
    """Test numeric parameter errors can be caught as ValueError."""
    assert issubclass(ExecutorParameterError, ValueError)
    assert issubclass(EvaluationParameterError, ValueError)
    assert issubclass(ExecutorParameterError, ExecutorError)
    assert issubclass(EvaluationParameterError, EvaluationError)


@pytest.mark.phase4
def test_exception_instantiation() -> None:
    """Test exception can be instantiated with messages."""
    msg = "Test error message"

    assert str(SearchError(msg)) == msg
    assert str(AgentTransportError(msg)) == msg
    assert str(ScriptExhaustedError(msg)) == msg


@pytest.mark.phase4
def test_selection_parse_error_keeps_text() -> None:
    """Test the unparsable agent text travels with the error."""
    exc = SelectionParseError("no integer", "I am not sure")
    assert str(exc) == "no integer"
    assert exc.text == "I am not sure"
    assert SelectionParseError("x").text == ""


@pytest.mark.phase4
def test_exception_catching() -> None:
    """Test exception catching works correctly."""
    try:
        raise ExecutorTimeoutError("timeout")
    except ExecutorError:
        pass
    else:
        pytest.fail("Should have caught ExecutorTimeoutError as ExecutorError")

    try:
        raise DuplicateObjectError("dup")
    except SearchError:
        pass
    else:
        pytest.fail("Should have caught DuplicateObjectError as SearchError")
