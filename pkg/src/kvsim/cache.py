"""Dynamic per-layer KV store with byte accounting and index compaction."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .errors import InvalidStateError

MIB = 1024 * 1024


@dataclass(frozen=True)
class FootprintReport:
    elements: int
    bytes: int
    megabytes: float  # MiB, so the published 1 GiB examples come out exact


@dataclass
class EvictionStats:
    tokens_evicted: int
    elapsed_s: float
    strategy_name: str = "compact"


def footprint(config: ModelConfig, num_tokens: int) -> FootprintReport:
    """Cache size for `num_tokens` cached positions.

    Elements count keys and values (factor 2) across layers and KV heads.
    d_v is taken equal to d_k here: the cache stores only KV-head
    projections, which is the reading that reproduces the published
    grouped-KV cache sizes.
    """
    if num_tokens < 0:
        raise ValueError("num_tokens must be non-negative")
    elements = (
        2 * config.num_layers * config.num_kv_heads * num_tokens * config.head_dim_k
    )
    nbytes = elements * config.bytes_per_element
    return FootprintReport(elements=elements, bytes=nbytes, megabytes=nbytes / MIB)


@dataclass
class LayerKV:
    keys: np.ndarray  # (num_kv_heads, slots, head_dim_k)
    values: np.ndarray  # (num_kv_heads, slots, head_dim_v)


class KvCache:
    """Per-layer key/value store plus position bookkeeping.

    `seen_tokens` is the counter the model uses to assign the next absolute
    position. Compaction resets it to the surviving slot count, so after an
    eviction the counter can assign positions that survivors already hold;
    `original_positions` keeps the per-slot record that lets the diagnostics
    see those collisions and gaps.
    """

    def __init__(
        self, num_layers: int, num_kv_heads: int, head_dim_k: int, head_dim_v: int
    ) -> None:
        self.layers = [
            LayerKV(
                keys=np.zeros((num_kv_heads, 0, head_dim_k)),
                values=np.zeros((num_kv_heads, 0, head_dim_v)),
            )
            for _ in range(num_layers)
        ]
        self.seen_tokens = 0
        self.original_positions = np.zeros(0, dtype=np.int64)

    @classmethod
    def for_config(cls, config: ModelConfig) -> "KvCache":
        return cls(
            config.num_layers,
            config.num_kv_heads,
            config.head_dim_k,
            config.head_dim_v,
        )

    @property
    def slot_count(self) -> int:
        return int(self.original_positions.shape[0])

    def update(
        self,
        layer_idx: int,
        new_keys: np.ndarray,
        new_values: np.ndarray,
        positions: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Append slots to one layer; layer 0 also commits the shared counters.

        The model walks layers in order within a pass, so positions and
        `seen_tokens` must advance exactly once per pass, not once per layer.

        Returns the layer's full key and value tensors after the append.
        """
        if new_keys.shape[1] != len(positions) or new_values.shape[1] != len(positions):
            raise ValueError("new slots and positions disagree on count")
        layer = self.layers[layer_idx]
        layer.keys = np.concatenate([layer.keys, new_keys], axis=1)
        layer.values = np.concatenate([layer.values, new_values], axis=1)
        if layer_idx == 0:
            self.original_positions = np.concatenate(
                [self.original_positions, np.asarray(positions, dtype=np.int64)]
            )
            self.seen_tokens += len(positions)
        return layer.keys, layer.values


def current_bytes(cache: KvCache, config: ModelConfig) -> int:
    """Exact byte size of the cache under `config`'s geometry."""
    if len(cache.layers) != config.num_layers:
        raise InvalidStateError(
            f"cache has {len(cache.layers)} layers, config expects {config.num_layers}"
        )
    slots = cache.slot_count
    for i, layer in enumerate(cache.layers):
        if layer.keys.shape != (config.num_kv_heads, slots, config.head_dim_k):
            raise InvalidStateError(f"layer {i} key tensor does not match config dims")
        if layer.values.shape != (config.num_kv_heads, slots, config.head_dim_v):
            raise InvalidStateError(f"layer {i} value tensor does not match config dims")
    return footprint(config, slots).bytes


def compact(cache: KvCache, keep_indices) -> EvictionStats:
    """Rebuild every layer with only the selected rows, in order.

    Survivors are copied into fresh arrays and `seen_tokens` is reset to the
    new slot count. `original_positions` keeps the survivors' old values.
    """
    t0 = time.perf_counter()
    idx = np.asarray(keep_indices, dtype=np.int64)
    n = cache.slot_count
    if idx.ndim != 1:
        raise ValueError("keep_indices must be a flat index sequence")
    if idx.size:
        if idx[0] < 0 or idx[-1] >= n or np.any(np.diff(idx) <= 0):
            raise ValueError(f"keep_indices must be strictly increasing within [0, {n})")
    for layer in cache.layers:
        layer.keys = layer.keys[:, idx, :]
        layer.values = layer.values[:, idx, :]
    cache.original_positions = cache.original_positions[idx]
    cache.seen_tokens = int(idx.size)
    return EvictionStats(
        tokens_evicted=n - int(idx.size), elapsed_s=time.perf_counter() - t0
    )
