"""Exception hierarchy for pipeline search operations."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .executor.shell import ShellResult


class SearchError(Exception):
    """Base exception for all pipeline-search errors."""
    pass


class ConfigError(SearchError):
    """Invalid run configuration or unbound action type."""
    pass


class RegistryError(SearchError):
    """Object registry error."""
    pass


class DuplicateObjectError(RegistryError):
    """An object with the same (kind, label) is already registered."""
    pass


class UnknownObjectError(RegistryError):
    """Lookup of an unregistered object id or label."""
    pass


class AgentError(SearchError):
    """Agent gateway error."""
    pass


class AgentTransportError(AgentError):
    """Endpoint unreachable or returned a non-success status."""
    pass


class ScriptExhaustedError(AgentError):
    """Scripted agent ran out of responses."""
    pass


class SelectionError(SearchError):
    """Action selection error."""
    pass


class SelectionParseError(SelectionError):
    """Agent output could not be parsed into a valid selection."""

    def __init__(self, message: str, text: str = "") -> None:
        super().__init__(message)
        self.text = text


class ExecutorError(SearchError):
    """Action execution failure.

    ``result`` carries the captured output when an external command ran.
    """

    def __init__(self, message: str, result: ShellResult | None = None) -> None:
        super().__init__(message)
        self.result = result


class ExecutorTimeoutError(ExecutorError):
    """External command exceeded its timeout."""
    pass


class ExecutorParameterError(ExecutorError, ValueError):
    """Invalid numeric input to an executor (dimension, density, weights)."""
    pass


class EvaluationError(SearchError):
    """Evaluator failure or misaligned scores."""
    pass


class EvaluationParameterError(EvaluationError, ValueError):
    """Invalid task maximum, weight or score alignment."""
    pass


class CheckpointError(SearchError):
    """Missing, corrupt or incompatible checkpoint or trace file."""
    pass


class StepAborted(SearchError):
    """Iteration aborted; the pre-step checkpoint has been written."""
    pass
