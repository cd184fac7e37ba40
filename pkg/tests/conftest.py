"""Pytest configuration and fixtures."""

import copy
import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import pytest

from posttrain_search.config import RunConfig, parse_config

# Object lists and action types of the published example config.
REFERENCE_DOCUMENT: dict[str, Any] = {
    "seed": 42,
    "total_timesteps": 100,
    "controller": "LaMDAgent_gpt",
    "controller_model": "gpt-4o-2024-11-20",
    "objects": {
        "base_models": ["models/gemma-2-2b"],
        "models": [
            "models/gemma-2-2b--gsm8k_1k",
            "models/gemma-2-2b--commonsense_qa_1k",
            "models/gemma-2-2b--trivia_qa_1k_w_context",
            "models/gemma-2-2b",
        ],
        "sft_dataset": [
            "data/sft_formatted/gsm8k_1k",
            "data/sft_formatted/commonsense_qa_1k",
            "data/sft_formatted/trivia_qa_1k_w_context",
            "data/sft_formatted/gsm1k_cqa1k_tqa1k",
        ],
        "sft_lr": [0.000001],
        "ties_weights": [[0.5, 0.5]],
        "ties_density": [0.5],
    },
    "action_types": {
        "sft": ["models", "sft_dataset", "sft_lr"],
        "ties_merging": ["base_models", "models", "models", "ties_weights", "ties_density"],
    },
    "eval_tasks": [["gsm8k", "acc"], ["commonsenseqa", "acc"], ["trivia_qa_w_context", "acc"]],
    "score_aggregation": "mean",
}


def _single_skill(skill: int, target: float, dimension: int = 3) -> dict[str, Any]:
    targets = [0.0] * dimension
    coverage = [0] * dimension
    targets[skill] = target
    coverage[skill] = 1
    return {"targets": targets, "coverage": coverage, "examples": 1000}


# Three skills, SFT only. With lr 1e-05 every step fully reaches its targets,
# so the best reachable mean over skills 0 and 1 is 0.78 (any model, then B, then A).
LANDSCAPE_DOCUMENT: dict[str, Any] = {
    "seed": 7,
    "total_timesteps": 4,
    "controller": "random",
    "controller_model": "gpt-4o-2024-11-20",
    "objects": {
        "models": ["base"],
        "sft_dataset": ["A", "B", "C", "mix"],
        "sft_lr": [1e-05],
    },
    "action_types": {"sft": ["models", "sft_dataset", "sft_lr"]},
    "eval_tasks": [["skill0", "acc"], ["skill1", "acc"]],
    "score_aggregation": "mean",
    "simulator": {
        "models": {"base": [0.0, 0.0, 0.0]},
        "datasets": {
            "A": _single_skill(0, 1.0),
            "B": _single_skill(1, 0.8),
            "C": _single_skill(2, 0.9),
            "mix": {"targets": [0.6, 0.6, 0.6], "coverage": [1, 1, 1], "examples": 1000},
        },
        "task_skills": {"skill0": 0, "skill1": 1},
        "test_offsets": {"skill0": -0.1},
    },
}


# Same skills for transfer experiments: a zero "small" base and a "large" one.
TRANSFER_DOCUMENT: dict[str, Any] = {
    "seed": 3,
    "total_timesteps": 2,
    "controller": "random",
    "objects": {
        "models": ["small", "large"],
        "sft_dataset": ["A", "B", "M"],
        "sft_lr": [1e-05],
    },
    "action_types": {"sft": ["models", "sft_dataset", "sft_lr"]},
    "eval_tasks": [["skill0", "acc"], ["skill1", "acc"], ["skill2", "acc"]],
    "score_aggregation": "mean",
    "simulator": {
        "models": {"small": [0.0, 0.0, 0.0], "large": [0.6, 0.6, 0.6]},
        "datasets": {
            "A": _single_skill(0, 1.0),
            "B": _single_skill(1, 0.9),
            "M": {"targets": [0.8, 0.75, 0.0], "coverage": [1, 1, 0], "examples": 1000},
        },
        "task_skills": {"skill0": 0, "skill1": 1, "skill2": 2},
    },
}


DocumentFactory = Callable[..., dict[str, Any]]


def _factory(template: dict[str, Any]) -> DocumentFactory:
    def make(**overrides: Any) -> dict[str, Any]:
        document = copy.deepcopy(template)
        document.update(copy.deepcopy(overrides))
        return document

    return make


@pytest.fixture
def reference_document() -> DocumentFactory:
    """Factory for the example config document, with top-level overrides."""
    return _factory(REFERENCE_DOCUMENT)


@pytest.fixture
def landscape_document() -> DocumentFactory:
    """Factory for the three-skill simulated landscape document."""
    return _factory(LANDSCAPE_DOCUMENT)


@pytest.fixture
def transfer_document() -> DocumentFactory:
    """Factory for the small/large base transfer document."""
    return _factory(TRANSFER_DOCUMENT)


@pytest.fixture
def landscape_config(landscape_document: DocumentFactory, tmp_path: Path) -> RunConfig:
    """Parsed landscape config rooted in a temporary directory."""
    return parse_config(landscape_document(), tmp_path)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Write a document as a config file and return its path."""

    def write(document: dict[str, Any], name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document, indent=2), encoding="utf-8")
        return path

    return write
