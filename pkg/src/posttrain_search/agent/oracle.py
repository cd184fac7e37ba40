"""Greedy oracle responder for scripted agents."""

from __future__ import annotations

from collections.abc import Callable

from ..exceptions import AgentError
from ..policy.parsing import format_object_selection, format_type_selection
from ..policy.prompts import action_list, candidate_blocks
from .base import AgentRequest, Phase

Choice = tuple[str, tuple[str, ...]]
Chooser = Callable[[], Choice]


class GreedyOracle:
    """Answers selection prompts with the action a chooser deems best.

    The chooser (typically a one-step lookahead over the live run) is asked at
    type selection; its answer is mapped onto the numbering read back from
    each prompt.
    """

    def __init__(self, chooser: Chooser | None = None) -> None:
        self._chooser = chooser
        self._pending: Choice | None = None

    def bind(self, chooser: Chooser) -> None:
        self._chooser = chooser
        self._pending = None

    def _choose(self) -> Choice:
        if self._chooser is None:
            raise AgentError("Greedy oracle is not bound to a chooser")
        return self._chooser()

    def __call__(self, request: AgentRequest, index: int) -> str:
        if request.phase is Phase.TYPE_SELECTION:
            self._pending = self._choose()
            types = action_list(request.prompt)
            return format_type_selection(types.index(self._pending[0]))

        if request.phase is Phase.OBJECT_SELECTION:
            action_type, labels = self._pending or self._choose()
            self._pending = None
            blocks = candidate_blocks(request.prompt)
            indices = [
                presented.index(label)
                for (_, presented), label in zip(blocks, labels, strict=True)
            ]
            return format_object_selection(indices)

        return f"Greedy choice at step {request.iteration}; keep taking the best one-step action."
