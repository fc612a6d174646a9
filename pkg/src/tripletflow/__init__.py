"""Event-camera optical flow by triplet matching."""

from .events import EmptyStreamError, Event, EventBatch, normalize_stream, split_by_polarity
from .matcher import (
    FlowRecord,
    FlowResult,
    IndexMap,
    MatcherParams,
    MatcherState,
    Triplet,
    estimate_flow_event,
    find_neighborhood,
    find_triplets,
    process_batch,
    triplet_velocity,
    triplet_weight,
)
from .oracle import brute_force_flow

__version__ = "0.1.0"

__all__ = [
    "EmptyStreamError",
    "Event",
    "EventBatch",
    "FlowRecord",
    "FlowResult",
    "IndexMap",
    "MatcherParams",
    "MatcherState",
    "Triplet",
    "brute_force_flow",
    "estimate_flow_event",
    "find_neighborhood",
    "find_triplets",
    "normalize_stream",
    "process_batch",
    "split_by_polarity",
    "triplet_velocity",
    "triplet_weight",
]
