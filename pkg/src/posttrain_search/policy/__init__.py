"""Prompt rendering, output parsing and selection policies."""

from .parsing import (
    format_object_selection,
    format_type_selection,
    parse_object_selection,
    parse_type_selection,
)
from .prompts import (
    PromptTemplate,
    TemplateName,
    action_list,
    candidate_blocks,
    load_template,
    render_object_prompt,
    render_type_prompt,
)
from .selection import (
    LlmPolicy,
    Policy,
    RandomPolicy,
    ScriptedPolicy,
    SelectionContext,
    SelectionTrace,
    select_action,
)

__all__ = [
    "LlmPolicy",
    "Policy",
    "PromptTemplate",
    "RandomPolicy",
    "ScriptedPolicy",
    "SelectionContext",
    "SelectionTrace",
    "TemplateName",
    "action_list",
    "candidate_blocks",
    "format_object_selection",
    "format_type_selection",
    "load_template",
    "parse_object_selection",
    "parse_type_selection",
    "render_object_prompt",
    "render_type_prompt",
    "select_action",
]
