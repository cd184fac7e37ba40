"""Executor registry and executor kind definitions."""

from enum import StrEnum

from .base import ExecutorSpec


class ExecutorKind(StrEnum):
    """Executors an action type can be bound to."""

    SIM_SFT = "sim_sft"
    SIM_TIES = "sim_ties"
    SHELL = "shell"


EXECUTORS: dict[ExecutorKind, ExecutorSpec] = {}
