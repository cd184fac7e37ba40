"""Executors producing new models from chosen actions."""

from .base import (
    DEFAULT_ROLES,
    ExecutionContext,
    ExecutorBinding,
    ExecutorSpec,
    SimParams,
    default_roles,
)
from .registry import EXECUTORS, ExecutorKind

# Import executor implementations to register them
from . import sim
from . import ties
from . import shell

from .dispatch import DEFAULT_EXECUTOR_KINDS, build_bindings, execute, produce
from .shell import ShellResult, shell_execute
from .sim import SimDataset, SimModel, decode_payload, encode_payload, learning_strength, sim_sft
from .ties import MergeSpec, ties_merge, ties_merge_vectors

__all__ = [
    "DEFAULT_EXECUTOR_KINDS",
    "DEFAULT_ROLES",
    "EXECUTORS",
    "ExecutionContext",
    "ExecutorBinding",
    "ExecutorKind",
    "ExecutorSpec",
    "MergeSpec",
    "ShellResult",
    "SimDataset",
    "SimModel",
    "SimParams",
    "build_bindings",
    "decode_payload",
    "default_roles",
    "encode_payload",
    "execute",
    "learning_strength",
    "produce",
    "shell_execute",
    "sim_sft",
    "ties_merge",
    "ties_merge_vectors",
]
