"""Action-type schemas and candidate enumeration."""

from .base import ActionCandidate, ActionSchema, PairMode, schemas_from_mapping
from .enumeration import count_candidates, enumerate_candidates

__all__ = [
    "ActionCandidate",
    "ActionSchema",
    "PairMode",
    "count_candidates",
    "enumerate_candidates",
    "schemas_from_mapping",
]
