"""Parsing of agent selection outputs."""

from __future__ import annotations

import re
from collections.abc import Sequence

from ..exceptions import SelectionParseError

# Standalone nonnegative integers: not part of a word, label, decimal or sign.
STANDALONE_INTEGER = re.compile(r"(?<![\w.\-])\d+(?![\w\-])(?!\.\d)")
BRACKET_GROUP = re.compile(r"\[\[\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\]\]")


def parse_type_selection(text: str, n_types: int) -> int:
    """Parse the selected action type index.

    Args:
        text: Agent output
        n_types: Number of presented action types

    Returns:
        The last standalone integer in the text

    Raises:
        SelectionParseError: No integer, or the value is out of range
    """
    matches = STANDALONE_INTEGER.findall(text)
    if not matches:
        raise SelectionParseError("No action type number found", text)
    value = int(matches[-1])
    if not 0 <= value < n_types:
        raise SelectionParseError(
            f"Action type number {value} out of range [0, {n_types})", text
        )
    return value


def parse_object_selection(text: str, slot_sizes: Sequence[int]) -> list[int]:
    """Parse the last ``[[i1, i2, ...]]`` group, one index per slot."""
    matches = BRACKET_GROUP.findall(text)
    if not matches:
        raise SelectionParseError("No [[ ]] object selection found", text)
    indices = [int(part) for part in matches[-1].split(",")]
    if len(indices) != len(slot_sizes):
        raise SelectionParseError(
            f"Expected {len(slot_sizes)} object numbers, got {len(indices)}", text
        )
    for slot, (index, size) in enumerate(zip(indices, slot_sizes, strict=True)):
        if not 0 <= index < size:
            raise SelectionParseError(
                f"Object number {index} out of range [0, {size}) for slot {slot}", text
            )
    return indices


def format_type_selection(index: int) -> str:
    return f"Selected Action Type NUMBER: {index}"


def format_object_selection(indices: Sequence[int]) -> str:
    return f"Selected Object NUMBERs: [[{', '.join(str(i) for i in indices)}]]"
