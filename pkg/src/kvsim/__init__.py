"""Desk-scale simulator for stateful multi-turn KV-cache management."""

from .cache import (
    MIB,
    EvictionStats,
    FootprintReport,
    KvCache,
    compact,
    current_bytes,
    footprint,
)
from .config import PRESETS, ModelConfig
from .diagnostics import (
    PositionalDiagnostics,
    TimelineSummary,
    fidelity_timeline,
    gap_stats,
    position_diagnostics,
)
from .errors import InvalidStateError
from .harness import (
    CSV_COLUMNS,
    TIMING_COLUMNS,
    ConversationTrace,
    RunConfig,
    RunResult,
    Turn,
    TurnMetrics,
    emit_report,
    load_trace,
    load_traces,
    run_conversation,
    run_turn,
    tokenize_text,
)
from .model import (
    StepOutput,
    ToyModel,
    attend,
    decode_step,
    full_recompute,
    greedy_token,
    prefill,
    rope_rotate,
)
from .policies import (
    AttentionRecord,
    AttentionTop,
    EvictionPolicy,
    EvictOldest,
    NoEviction,
    SlidingWindowGist,
    accumulate_attention,
    apply_policy,
    select_keep_indices,
    should_evict,
)
from .tracegen import build_trace_spec, turn_counts, write_trace

__version__ = "0.1.0"

__all__ = [
    "MIB",
    "PRESETS",
    "CSV_COLUMNS",
    "TIMING_COLUMNS",
    "AttentionRecord",
    "AttentionTop",
    "ConversationTrace",
    "EvictOldest",
    "EvictionPolicy",
    "EvictionStats",
    "FootprintReport",
    "InvalidStateError",
    "KvCache",
    "ModelConfig",
    "NoEviction",
    "PositionalDiagnostics",
    "RunConfig",
    "RunResult",
    "SlidingWindowGist",
    "StepOutput",
    "TimelineSummary",
    "ToyModel",
    "Turn",
    "TurnMetrics",
    "accumulate_attention",
    "apply_policy",
    "attend",
    "build_trace_spec",
    "compact",
    "current_bytes",
    "decode_step",
    "emit_report",
    "fidelity_timeline",
    "footprint",
    "full_recompute",
    "gap_stats",
    "greedy_token",
    "load_trace",
    "load_traces",
    "position_diagnostics",
    "prefill",
    "rope_rotate",
    "run_conversation",
    "run_turn",
    "select_keep_indices",
    "should_evict",
    "tokenize_text",
    "turn_counts",
    "write_trace",
]
