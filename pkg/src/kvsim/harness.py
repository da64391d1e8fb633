"""Stateful multi-turn benchmark driver.

Each turn runs trigger -> evict -> prefill -> decode with metric capture:

1. if the pre-prefill checkpoint is enabled and the cache ended the previous
   turn above the threshold, apply the eviction policy;
2. prefill all user tokens unconditionally (the threshold is a trigger for
   eviction, never a gate on additions) and record TTFT;
3. decode greedily up to the turn's budget or the end-of-sequence token,
   applying the policy after each generated token when the per-token
   checkpoint is enabled and the cache sits above the threshold;
4. compute positional diagnostics and byte accounting.

Byte accounting follows ``RunConfig.model_config`` (the footprint preset),
which may describe a larger model than the one actually simulated; counts
of cached slots are what tie the two together. Reported times are
simulator-process wall clock and are labeled ``sim_`` in the CSV.
"""

from __future__ import annotations

import csv
import json
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cache import MIB, KvCache, footprint
from .config import ModelConfig
from .diagnostics import (
    PositionalDiagnostics,
    fidelity_timeline,
    position_diagnostics,
)
from .model import ToyModel, decode_step, greedy_token, prefill
from .policies import (
    AttentionRecord,
    EvictionPolicy,
    NoEviction,
    accumulate_attention,
    apply_policy,
    should_evict,
)

CSV_COLUMNS = [
    "run_id",
    "strategy",
    "turn",
    "cache_mb_pre_turn",
    "tokens_evicted",
    "sim_eviction_ms",
    "cache_mb_post_prefill",
    "cache_mb_end_generation",
    "sim_ttft_ms",
    "generated_tokens",
    "sim_tokens_per_s",
    "seen_tokens_end",
    "discontinuities",
    "max_gap",
    "contiguity_ratio",
    "extrapolated_slots",
    "mean_distance_distortion",
]

# wall-clock derived columns, excluded from the determinism contract
TIMING_COLUMNS = ("sim_eviction_ms", "sim_ttft_ms", "sim_tokens_per_s")

DEFAULT_MAX_NEW_TOKENS = 32  # for user messages with no recorded reply


@dataclass
class Turn:
    user_tokens: list[int]
    max_new_tokens: int

    def __post_init__(self) -> None:
        if not self.user_tokens:
            raise ValueError("a turn must carry at least one user token")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be at least 1")


@dataclass
class ConversationTrace:
    id: str
    turns: list[Turn]

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValueError(f"conversation {self.id!r} has no turns")


@dataclass
class TurnMetrics:
    turn_index: int  # 1-based
    cache_bytes_pre_turn: int
    tokens_evicted_pre_turn: int
    eviction_elapsed_s: float  # pre-turn plus any mid-generation evictions
    cache_bytes_post_prefill: int
    cache_bytes_end_generation: int
    ttft_elapsed_s: float
    generated_tokens: int
    throughput_tokens_per_s: float
    positional: PositionalDiagnostics
    seen_tokens_end: int


@dataclass
class RunConfig:
    """Everything one benchmark run needs besides the trace itself.

    ``model_config`` drives byte accounting and the extrapolation boundary.
    ``sim_config`` (defaulting to ``model_config``) sizes the model that is
    actually stepped; the llama footprint presets are paired with toy
    simulation dimensions because a full-size simulation is not a desk-scale
    computation, and every reported quantity depends only on slot counts,
    attention weights, and token ids.
    """

    model_config: ModelConfig
    policy: EvictionPolicy
    threshold_bytes: int
    sim_config: Optional[ModelConfig] = None
    before_prefill: bool = True
    per_generated_token: bool = True
    seed: int = 0
    out_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.threshold_bytes < 0:
            raise ValueError("threshold_bytes must be non-negative")
        if self.threshold_bytes == 0 and not isinstance(self.policy, NoEviction):
            raise ValueError("threshold_bytes must be positive for evicting policies")

    def resolved_sim_config(self) -> ModelConfig:
        base = self.sim_config if self.sim_config is not None else self.model_config
        return base.with_seed(self.seed)


@dataclass
class RunResult:
    run_id: str
    strategy: str
    turns: list[TurnMetrics]
    trace_id: str = ""


def tokenize_text(text: str, vocab_size: int) -> list[int]:
    """UTF-8 bytes mod vocab_size; stable across platforms and runs."""
    return [b % vocab_size for b in text.encode("utf-8")]


def _synthetic_tokens(
    seed: int, trace_id: str, turn_number: int, count: int, vocab_size: int
) -> list[int]:
    # EOS (vocab_size - 1) is reserved for the generation stop rule, so user
    # streams draw from [0, vocab_size - 1)
    ss = np.random.SeedSequence(
        [seed, zlib.crc32(trace_id.encode("utf-8")), turn_number]
    )
    rng = np.random.default_rng(ss)
    return [int(t) for t in rng.integers(0, vocab_size - 1, size=count)]


def _sharegpt_trace(obj: dict, vocab_size: int) -> ConversationTrace:
    trace_id = str(obj.get("id", "")) or "unnamed"
    msgs = obj.get("conversations")
    if not isinstance(msgs, list):
        raise ValueError(f"conversation {trace_id!r} has no 'conversations' list")
    turns: list[Turn] = []
    pending: Optional[list[int]] = None
    for msg in msgs:
        role = msg.get("from")
        value = msg.get("value", "")
        if role == "human":
            if pending is not None:
                turns.append(Turn(pending, DEFAULT_MAX_NEW_TOKENS))
            tokens = tokenize_text(value, vocab_size)
            pending = tokens if tokens else None
        elif role == "gpt":
            if pending is not None:
                reply_len = len(tokenize_text(value, vocab_size))
                turns.append(Turn(pending, max(1, reply_len)))
                pending = None
        # other roles (system etc.) are ignored
    if pending is not None:
        turns.append(Turn(pending, DEFAULT_MAX_NEW_TOKENS))
    if not turns:
        raise ValueError(f"conversation {trace_id!r} has no usable turns")
    return ConversationTrace(id=trace_id, turns=turns)


def _synthetic_trace(obj: dict, seed: int, vocab_size: int) -> ConversationTrace:
    trace_id = str(obj.get("id", "")) or "synthetic"
    raw_turns = obj.get("turns")
    if not isinstance(raw_turns, list) or not raw_turns:
        raise ValueError(f"trace {trace_id!r} has no 'turns' list")
    turns = []
    for turn_number, spec in enumerate(raw_turns, start=1):
        user = int(spec["user"])
        gen = int(spec["gen"])
        if user < 1 or gen < 1:
            raise ValueError(
                f"trace {trace_id!r} turn {turn_number}: user and gen must be >= 1"
            )
        tokens = _synthetic_tokens(seed, trace_id, turn_number, user, vocab_size)
        turns.append(Turn(tokens, gen))
    return ConversationTrace(id=trace_id, turns=turns)


def load_traces(
    path, fmt: str, *, seed: int = 0, vocab_size: int = 257
) -> list[ConversationTrace]:
    """Parse a trace file into conversations.

    ``sharegpt``: array of {"id", "conversations": [{"from", "value"}, ...]}
    objects; human messages open turns, the following assistant message sets
    that turn's generation budget to its own token length.

    ``synthetic``: {"id", "turns": [{"user": n, "gen": m}, ...]} (or an array
    of such objects); token ids are derived deterministically from ``seed``.
    """
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"{p}: parse error at line {e.lineno}: {e.msg}") from e
    items = data if isinstance(data, list) else [data]
    if not items:
        raise ValueError(f"{p}: file contains no conversations")
    if fmt == "sharegpt":
        return [_sharegpt_trace(obj, vocab_size) for obj in items]
    if fmt == "synthetic":
        return [_synthetic_trace(obj, seed, vocab_size) for obj in items]
    raise ValueError(f"unknown trace format {fmt!r}")


def load_trace(path, fmt: str, *, seed: int = 0, vocab_size: int = 257) -> ConversationTrace:
    """First conversation of a trace file."""
    return load_traces(path, fmt, seed=seed, vocab_size=vocab_size)[0]


def _bytes_for(config: ModelConfig, slots: int) -> int:
    return footprint(config, slots).bytes


def run_turn(
    model: ToyModel,
    cache: KvCache,
    policy: EvictionPolicy,
    run_config: RunConfig,
    turn: Turn,
    record: Optional[AttentionRecord] = None,
    turn_index: int = 1,
) -> tuple[TurnMetrics, AttentionRecord]:
    """One trigger -> evict -> prefill -> decode cycle.

    Returns the metrics plus the attention record to carry into the next
    turn (it reflects the last model pass of this one).
    """
    acct = run_config.model_config
    pre_bytes = _bytes_for(acct, cache.slot_count)

    evicted_pre_turn = 0
    eviction_elapsed = 0.0
    if run_config.before_prefill and should_evict(pre_bytes, run_config.threshold_bytes):
        stats = apply_policy(cache, policy, record)
        evicted_pre_turn = stats.tokens_evicted
        eviction_elapsed += stats.elapsed_s

    t0 = time.perf_counter()
    out = prefill(model, cache, turn.user_tokens)
    ttft = time.perf_counter() - t0
    post_prefill_bytes = _bytes_for(acct, cache.slot_count)
    record = accumulate_attention(out, record)

    eos = model.config.eos_token_id
    generated = 0
    gen_start = time.perf_counter()
    for _ in range(turn.max_new_tokens):
        token = greedy_token(out.logits)
        if token == eos:
            break
        out = decode_step(model, cache, token)
        record = accumulate_attention(out, record)
        generated += 1
        if run_config.per_generated_token and should_evict(
            _bytes_for(acct, cache.slot_count), run_config.threshold_bytes
        ):
            stats = apply_policy(cache, policy, record)
            eviction_elapsed += stats.elapsed_s
    gen_elapsed = time.perf_counter() - gen_start
    throughput = generated / gen_elapsed if generated and gen_elapsed > 0 else 0.0

    metrics = TurnMetrics(
        turn_index=turn_index,
        cache_bytes_pre_turn=pre_bytes,
        tokens_evicted_pre_turn=evicted_pre_turn,
        eviction_elapsed_s=eviction_elapsed,
        cache_bytes_post_prefill=post_prefill_bytes,
        cache_bytes_end_generation=_bytes_for(acct, cache.slot_count),
        ttft_elapsed_s=ttft,
        generated_tokens=generated,
        throughput_tokens_per_s=throughput,
        positional=position_diagnostics(cache.original_positions, acct.max_position),
        seen_tokens_end=cache.seen_tokens,
    )
    return metrics, record


def run_conversation(run_config: RunConfig, trace: ConversationTrace) -> list[TurnMetrics]:
    """Run a whole conversation against a fresh cache, carrying state between turns."""
    sim = run_config.resolved_sim_config()
    model = ToyModel(sim)
    cache = KvCache.for_config(sim)
    record: Optional[AttentionRecord] = None
    out: list[TurnMetrics] = []
    for i, turn in enumerate(trace.turns, start=1):
        metrics, record = run_turn(
            model, cache, run_config.policy, run_config, turn, record, turn_index=i
        )
        out.append(metrics)
    return out


def _csv_row(result: RunResult, m: TurnMetrics) -> list:
    d = m.positional
    return [
        result.run_id,
        result.strategy,
        m.turn_index,
        m.cache_bytes_pre_turn / MIB,
        m.tokens_evicted_pre_turn,
        m.eviction_elapsed_s * 1000.0,
        m.cache_bytes_post_prefill / MIB,
        m.cache_bytes_end_generation / MIB,
        m.ttft_elapsed_s * 1000.0,
        m.generated_tokens,
        m.throughput_tokens_per_s,
        m.seen_tokens_end,
        d.discontinuities,
        d.max_gap,
        d.contiguity_ratio,
        d.extrapolated_slots,
        d.mean_distance_distortion,
    ]


def emit_report(results: Sequence[RunResult], out_dir) -> list[Path]:
    """Write metrics.csv (one row per turn) and summary.json under out_dir."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create report directory {out}: {e}") from e

    csv_path = out / "metrics.csv"
    summary_path = out / "summary.json"

    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for result in results:
            for m in result.turns:
                writer.writerow(_csv_row(result, m))

    summary = {}
    for result in results:
        timeline = fidelity_timeline([m.positional for m in result.turns])
        end_mb = [m.cache_bytes_end_generation / MIB for m in result.turns]
        summary[result.run_id] = {
            "strategy": result.strategy,
            "trace_id": result.trace_id,
            "turns": len(result.turns),
            "total_generated_tokens": sum(m.generated_tokens for m in result.turns),
            "total_tokens_evicted_pre_turn": sum(
                m.tokens_evicted_pre_turn for m in result.turns
            ),
            "final_cache_mb": end_mb[-1] if end_mb else 0.0,
            "peak_cache_mb": max(end_mb) if end_mb else 0.0,
            "mean_end_generation_mb": float(np.mean(end_mb)) if end_mb else 0.0,
            "max_discontinuities": timeline.max_discontinuities,
            "first_extrapolation_turn": timeline.first_extrapolation_turn,
            "mean_contiguity": timeline.mean_contiguity,
        }
    with summary_path.open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return [csv_path, summary_path]
