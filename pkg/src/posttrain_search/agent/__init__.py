"""Agent gateway: the single point of contact with the selecting model."""

from .base import AbstractAgent, AgentRequest, BaseAgent, Phase
from .http import ChatCompletionsAgent
from .oracle import GreedyOracle
from .scripted import ScriptedAgent, load_script
from .trace import AgentCall, AgentTrace

__all__ = [
    "AbstractAgent",
    "AgentCall",
    "AgentRequest",
    "AgentTrace",
    "BaseAgent",
    "ChatCompletionsAgent",
    "GreedyOracle",
    "Phase",
    "ScriptedAgent",
    "load_script",
]
