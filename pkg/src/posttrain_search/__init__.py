"""Agent-driven search over model post-training pipelines."""

from .agent import ChatCompletionsAgent, GreedyOracle, ScriptedAgent
from .config import RunConfig, load_config, parse_config, validate_config
from .experiments import (
    OneStepLookahead,
    PipelineScript,
    grid_search_ties,
    replay_pipeline,
    run_random_baseline,
    scale_data_replay,
    transfer_model_replay,
)
from .orchestrator import Orchestrator, RunState, resume, run, top_k, window_stats
from .registry import Registry

__version__ = "0.1.0"
__all__ = [
    "ChatCompletionsAgent",
    "GreedyOracle",
    "OneStepLookahead",
    "Orchestrator",
    "PipelineScript",
    "Registry",
    "RunConfig",
    "RunState",
    "ScriptedAgent",
    "grid_search_ties",
    "load_config",
    "parse_config",
    "replay_pipeline",
    "resume",
    "run",
    "run_random_baseline",
    "scale_data_replay",
    "top_k",
    "transfer_model_replay",
    "validate_config",
    "window_stats",
]
