"""Prompt templates and the renderers filling them."""

from __future__ import annotations

import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum
from functools import cache
from importlib import resources
from pathlib import Path

from ..constants import EMPTY_MEMORY
from ..exceptions import ConfigError

PLACEHOLDER_PATTERN = re.compile(
    r"<(?:reflection|action_types|object_cands|previous results|previous memories|new results)>"
)

ACTION_LIST_HEADER = "Action List:\n"
ACTION_LIST_FOOTER = "\n\nSelected Action Type NUMBER:"
OBJECT_LIST_HEADER = "Object Candidates:\n"
OBJECT_LIST_FOOTER = "\n\nSelected Object NUMBERs:"
OBJECT_TYPE_PREFIX = "Object Type "


class TemplateName(StrEnum):
    TYPE_SELECTION = "type_selection"
    OBJECT_SELECTION = "object_selection"
    MEMORY_UPDATE = "memory_update"


@dataclass(slots=True, frozen=True)
class PromptTemplate:
    """Template body whose placeholder tokens are the only substitution points."""

    name: str
    body: str

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(PLACEHOLDER_PATTERN.findall(self.body))

    def render(self, values: Mapping[str, str]) -> str:
        """Substitute every placeholder in a single pass.

        Args:
            values: Token (e.g. "<reflection>") to replacement text

        Returns:
            Rendered prompt; replacement text is never rescanned

        Raises:
            ConfigError: If a placeholder in the body has no value
        """
        missing = sorted(self.placeholders - values.keys())
        if missing:
            raise ConfigError(f"Template {self.name} missing values for {missing}")
        return PLACEHOLDER_PATTERN.sub(lambda m: values[m.group(0)], self.body)


@cache
def load_template(name: TemplateName | str, directory: str | None = None) -> PromptTemplate:
    """Load a template shipped with the package, or from ``directory``."""
    filename = f"{TemplateName(name)}.txt"
    try:
        if directory is None:
            body = (
                resources.files("posttrain_search.policy")
                .joinpath("templates", filename)
                .read_text(encoding="utf-8")
            )
        else:
            body = (Path(directory) / filename).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot load prompt template {filename}: {e}") from e
    return PromptTemplate(name=str(name), body=body)


def reflection_text(memory: str) -> str:
    return memory if memory else EMPTY_MEMORY


def format_action_types(types: Sequence[str]) -> str:
    return "\n".join(f"{i}: {name}" for i, name in enumerate(types))


def format_object_candidates(slots: Sequence[tuple[str, Sequence[str]]]) -> str:
    blocks = []
    for i, (kind, labels) in enumerate(slots):
        lines = [f"{OBJECT_TYPE_PREFIX}{i}: {kind}"]
        lines.extend(f"{j}: {label}" for j, label in enumerate(labels))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def render_type_prompt(
    memory: str, types: Sequence[str], template: PromptTemplate | None = None
) -> str:
    """Render the action-type selection prompt.

    Args:
        memory: Current memory text ("" before the first update)
        types: Action type names, numbered from 0
        template: Override of the shipped template

    Returns:
        Prompt text
    """
    if not types:
        raise ConfigError("At least one action type is required")
    template = template or load_template(TemplateName.TYPE_SELECTION)
    return template.render(
        {
            "<reflection>": reflection_text(memory),
            "<action_types>": format_action_types(types),
        }
    )


def render_object_prompt(
    memory: str,
    slots: Sequence[tuple[str, Sequence[str]]],
    template: PromptTemplate | None = None,
) -> str:
    """Render the object selection prompt: one numbered block per slot."""
    if not slots or any(not labels for _, labels in slots):
        raise ConfigError("Every object slot needs at least one candidate")
    template = template or load_template(TemplateName.OBJECT_SELECTION)
    return template.render(
        {
            "<reflection>": reflection_text(memory),
            "<object_cands>": format_object_candidates(slots),
        }
    )


def _section(prompt: str, header: str, footer: str) -> str:
    end = prompt.rfind(footer)
    start = prompt.rfind(header, 0, end if end >= 0 else None)
    if start < 0 or end < 0:
        return ""
    return prompt[start + len(header) : end]


def _numbered(line: str) -> str:
    _, _, rest = line.partition(": ")
    return rest


def action_list(prompt: str) -> list[str]:
    """Recover the presented action type names from a type prompt."""
    section = _section(prompt, ACTION_LIST_HEADER, ACTION_LIST_FOOTER)
    return [_numbered(line) for line in section.splitlines() if line]


def candidate_blocks(prompt: str) -> list[tuple[str, list[str]]]:
    """Recover the presented (kind, labels) blocks from an object prompt."""
    section = _section(prompt, OBJECT_LIST_HEADER, OBJECT_LIST_FOOTER)
    blocks: list[tuple[str, list[str]]] = []
    for chunk in section.split("\n\n"):
        lines = chunk.splitlines()
        if not lines or not lines[0].startswith(OBJECT_TYPE_PREFIX):
            continue
        blocks.append((_numbered(lines[0]), [_numbered(line) for line in lines[1:]]))
    return blocks
