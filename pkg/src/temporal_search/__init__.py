"""Confidence-guided temporal search over long videos."""

from .domain import (
    FinalSelection,
    Interval,
    KeyframeMemory,
    KeyframeNote,
    ModelVerdict,
    Query,
    SearchConfig,
    SearchNode,
    VideoSource,
    compute_confidence,
    interval_iou,
    node_value,
)
from .errors import BackendError, ConfigError, FrameError, ProtocolError, TemporalSearchError
from .sampling import FrameSample, select_candidates, uniform_sample, uniform_split
from .search import (
    Frontier,
    SearchResult,
    SearchTrace,
    StopReason,
    run_sequential_ts,
    run_strategy,
    run_ts_bfs,
    run_uniform_sampling,
    run_uniform_temporal_voting,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "ConfigError",
    "FinalSelection",
    "FrameError",
    "FrameSample",
    "Frontier",
    "Interval",
    "KeyframeMemory",
    "KeyframeNote",
    "ModelVerdict",
    "ProtocolError",
    "Query",
    "SearchConfig",
    "SearchNode",
    "SearchResult",
    "SearchTrace",
    "StopReason",
    "TemporalSearchError",
    "VideoSource",
    "compute_confidence",
    "interval_iou",
    "node_value",
    "run_sequential_ts",
    "run_strategy",
    "run_ts_bfs",
    "run_uniform_sampling",
    "run_uniform_temporal_voting",
    "select_candidates",
    "uniform_sample",
    "uniform_split",
]
