"""Cache-management strategies as pure index selection over cache state.

Each strategy reduces to "which slot indices survive"; the shared
:func:`apply_policy` wires the selection through compaction and keeps the
attention record aligned with the surviving slots.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, Optional, Union

import numpy as np

from .cache import EvictionStats, KvCache, compact
from .errors import InvalidStateError
from .model import StepOutput


@dataclass(frozen=True)
class NoEviction:
    label: ClassVar[str] = "baseline"


@dataclass(frozen=True)
class EvictOldest:
    window_tokens: int
    label: ClassVar[str] = "evict-oldest"

    def __post_init__(self) -> None:
        if self.window_tokens <= 0:
            raise ValueError("window_tokens must be positive")


@dataclass(frozen=True)
class SlidingWindowGist:
    gist_token_count: int
    recent_token_count: int
    label: ClassVar[str] = "sliding-window-gist"

    def __post_init__(self) -> None:
        if self.gist_token_count < 0 or self.recent_token_count < 0:
            raise ValueError("gist and recent token counts must be non-negative")
        if self.gist_token_count + self.recent_token_count == 0:
            raise ValueError("gist_token_count + recent_token_count must be positive")


@dataclass(frozen=True)
class AttentionTop:
    keep_ratio: float
    label: ClassVar[str] = "attention-top"

    def __post_init__(self) -> None:
        if not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError("keep_ratio must lie in (0, 1]")


EvictionPolicy = Union[NoEviction, EvictOldest, SlidingWindowGist, AttentionTop]

POLICY_LABELS = {
    NoEviction.label: NoEviction,
    EvictOldest.label: EvictOldest,
    SlidingWindowGist.label: SlidingWindowGist,
    AttentionTop.label: AttentionTop,
}


@dataclass
class AttentionRecord:
    """Per-slot cumulative attention mass from the most recent model pass."""

    scores: np.ndarray


def should_evict(cache_bytes: int, threshold_bytes: int) -> bool:
    """Strict comparison: sitting exactly at the threshold does not trigger."""
    return cache_bytes > threshold_bytes


def accumulate_attention(
    step: StepOutput, existing: Optional[AttentionRecord] = None
) -> AttentionRecord:
    """Score every cached slot by the attention mass it received in one pass.

    Sums weight over layers, heads, and query rows, so a prefill (many rows)
    and a decode step (one row) aggregate the same way. Scores replace
    whatever the previous pass recorded rather than accumulating across
    passes; slots appended after a pass score 0 until the next one.
    """
    mats = step.attention_weights
    if not mats:
        raise InvalidStateError("step carries no attention weights")
    cols = mats[0].shape[-1]
    if any(m.shape[-1] != cols for m in mats):
        raise InvalidStateError("layers disagree on cached-slot count")
    if existing is not None and existing.scores.shape[0] > cols:
        raise InvalidStateError("existing record covers more slots than this pass")
    scores = np.zeros(cols)
    for m in mats:
        scores += m.sum(axis=(0, 1))
    return AttentionRecord(scores=scores)


def _ceil_ratio(ratio: float, count: int) -> int:
    # ceiling in exact rational arithmetic; float products can graze the
    # integer boundary and push the count off by one
    return min(count, math.ceil(Fraction(ratio) * count))


def select_keep_indices(
    policy: EvictionPolicy, slot_count: int, record: Optional[AttentionRecord] = None
) -> np.ndarray:
    """Strictly increasing indices of the slots a policy retains."""
    if slot_count <= 0:
        raise ValueError("slot_count must be positive")
    if isinstance(policy, NoEviction):
        return np.arange(slot_count, dtype=np.int64)
    if isinstance(policy, EvictOldest):
        keep = min(policy.window_tokens, slot_count)
        return np.arange(slot_count - keep, slot_count, dtype=np.int64)
    if isinstance(policy, SlidingWindowGist):
        if policy.gist_token_count + policy.recent_token_count >= slot_count:
            return np.arange(slot_count, dtype=np.int64)
        head = np.arange(min(policy.gist_token_count, slot_count), dtype=np.int64)
        tail = np.arange(
            slot_count - policy.recent_token_count, slot_count, dtype=np.int64
        )
        return np.unique(np.concatenate([head, tail]))
    if isinstance(policy, AttentionTop):
        if record is None:
            raise ValueError("attention-top selection requires an attention record")
        scores = np.asarray(record.scores, dtype=np.float64)
        if scores.shape[0] > slot_count:
            raise ValueError("record covers more slots than the cache holds")
        if scores.shape[0] < slot_count:
            # slots appended after the last scoring pass carry score 0
            scores = np.concatenate([scores, np.zeros(slot_count - scores.shape[0])])
        keep = _ceil_ratio(policy.keep_ratio, slot_count)
        # primary: score descending; ties: higher (more recent) index first
        order = np.lexsort((-np.arange(slot_count), -scores))
        return np.sort(order[:keep]).astype(np.int64)
    raise TypeError(f"unknown eviction policy: {policy!r}")


def apply_policy(
    cache: KvCache, policy: EvictionPolicy, record: Optional[AttentionRecord] = None
) -> EvictionStats:
    """Compact the cache to the policy's survivors; filter the record to match."""
    t0 = time.perf_counter()
    pre_slots = cache.slot_count
    keep = select_keep_indices(policy, pre_slots, record)
    compact(cache, keep)
    if record is not None:
        scores = np.asarray(record.scores, dtype=np.float64)
        if scores.shape[0] < pre_slots:
            scores = np.concatenate([scores, np.zeros(pre_slots - scores.shape[0])])
        record.scores = scores[keep]
    return EvictionStats(
        tokens_evicted=pre_slots - int(keep.size),
        elapsed_s=time.perf_counter() - t0,
        strategy_name=policy.label,
    )
