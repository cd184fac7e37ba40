"""Enumeration of every concrete action available at an iteration."""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping, Sequence
from typing import Any

from ..logging import get_logger
from ..registry import ObjectEntry
from .base import ActionCandidate, ActionSchema, PairMode

logger = get_logger(__name__)

Pool = Mapping[str, Sequence[ObjectEntry]]


def is_symmetric_weights(payload: Any) -> bool:
    """True when a weight tuple gives every merged model the same weight."""
    if not isinstance(payload, (list, tuple)) or not payload:
        return False
    try:
        values = [float(v) for v in payload]
    except (TypeError, ValueError):
        return False
    return all(v == values[0] for v in values)


def _pair_mode_for(
    schema: ActionSchema,
    combo: Sequence[ObjectEntry],
    unordered_pairs: bool,
) -> PairMode:
    if not unordered_pairs:
        return PairMode.PRODUCT
    # A weight tuple sized like the repeated group decides symmetry.
    for kind, positions in schema.repeated_kinds.items():
        for i, entry in enumerate(combo):
            if schema.slots[i] == kind:
                continue
            payload = entry.payload
            if (
                isinstance(payload, (list, tuple))
                and len(payload) == len(positions)
                and not is_symmetric_weights(payload)
            ):
                return PairMode.ORDERED
    return PairMode.UNORDERED


def _admissible(
    schema: ActionSchema, indices: Sequence[int], mode: PairMode
) -> bool:
    if mode is PairMode.PRODUCT:
        return True
    for positions in schema.repeated_kinds.values():
        picked = [indices[p] for p in positions]
        if mode is PairMode.UNORDERED:
            if any(a >= b for a, b in zip(picked, picked[1:])):
                return False
        elif len(set(picked)) != len(picked):
            return False
    return True


def enumerate_candidates(
    schemas: Sequence[ActionSchema],
    pool: Pool,
    *,
    unordered_pairs: bool = True,
) -> list[ActionCandidate]:
    """Enumerate every type-correct action over the pool.

    Candidates come in schema order, then lexicographic order of per-slot
    registration indices. Repeated slots of one kind yield each unordered
    pair once without self-pairs, unless an asymmetric weight tuple is bound
    (ordered pairs) or ``unordered_pairs`` is off (plain product).

    Args:
        schemas: Action schemas in declaration order
        pool: Objects per kind in registration order
        unordered_pairs: Collapse symmetric repeated slots to unordered pairs

    Returns:
        Deterministic, duplicate-free candidate list
    """
    candidates: list[ActionCandidate] = []
    for schema in schemas:
        slot_pools = [pool.get(kind, ()) for kind in schema.slots]
        if any(len(p) == 0 for p in slot_pools):
            logger.debug("Schema %s has an empty slot kind; no candidates", schema.name)
            continue

        for indices in itertools.product(*(range(len(p)) for p in slot_pools)):
            combo = [slot_pools[s][i] for s, i in enumerate(indices)]
            mode = _pair_mode_for(schema, combo, unordered_pairs)
            if not _admissible(schema, indices, mode):
                continue
            candidates.append(
                ActionCandidate(schema=schema.name, bindings=tuple(e.id for e in combo))
            )

    logger.debug("Enumerated %d candidates over %d schemas", len(candidates), len(schemas))
    return candidates


def count_candidates(
    schemas: Sequence[ActionSchema],
    pool_sizes: Mapping[str, int],
    *,
    pair_mode: PairMode = PairMode.UNORDERED,
) -> int:
    """Count candidates from pool sizes alone.

    Matches ``len(enumerate_candidates(...))`` when every bound weight tuple is
    symmetric (``UNORDERED``), all are asymmetric (``ORDERED``), or pairs are
    not collapsed (``PRODUCT``). For the shipped SFT/TIES schemas with m
    models this is m*d*lr + b*w*rho*m(m-1)/2.
    """
    total = 0
    for schema in schemas:
        product = 1
        seen: set[str] = set()
        for kind in schema.slots:
            if kind in seen:
                continue
            seen.add(kind)
            n = max(int(pool_sizes.get(kind, 0)), 0)
            r = schema.slots.count(kind)
            if r == 1 or pair_mode is PairMode.PRODUCT:
                product *= n**r
            elif pair_mode is PairMode.UNORDERED:
                product *= math.comb(n, r)
            else:
                product *= math.perm(n, r)
        total += product
    return total
