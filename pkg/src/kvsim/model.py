"""Seeded toy multi-head attention stack with RoPE and KV caching.

Attention plus residual only: no MLP, no normalization, no training. That
keeps the no-cache reference path simple while preserving everything the
cache bookkeeping and positional rotations can do to the outputs.

Weights come from a single PCG64 stream seeded by ``config.seed``, uniform
in [-0.05, 0.05], drawn in a fixed order (embedding, then per layer
q/k/v/out projections, then the unembedding), so two builds from the same
config are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cache import KvCache
from .config import ModelConfig
from .errors import InvalidStateError

WEIGHT_LOW = -0.05
WEIGHT_HIGH = 0.05


def _rotate(block: np.ndarray, positions: np.ndarray, base: float) -> np.ndarray:
    """Rotate feature pairs of `block` (rows, heads, dim) at per-row positions."""
    d = block.shape[-1]
    # theta_i = base ** (-2i / d); arange(0, d, 2) enumerates the 2i values
    inv_freq = base ** (-np.arange(0, d, 2, dtype=np.float64) / d)
    angles = np.asarray(positions, dtype=np.float64)[:, None] * inv_freq[None, :]
    cos = np.cos(angles)[:, None, :]
    sin = np.sin(angles)[:, None, :]
    even = block[..., 0::2]
    odd = block[..., 1::2]
    out = np.empty_like(block)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


def rope_rotate(v, position: int, base: float = 10000.0) -> np.ndarray:
    """Rotate pairs (v[2i], v[2i+1]) by angle position * base**(-2i/len(v)).

    Pair norms are preserved; position 0 leaves the vector unchanged.
    """
    vec = np.asarray(v, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] == 0 or vec.shape[0] % 2 != 0:
        raise ValueError("rope_rotate expects a flat, even-length vector")
    if position < 0:
        raise ValueError("position must be non-negative")
    if base <= 0:
        raise ValueError("base must be positive")
    return _rotate(vec[np.newaxis, np.newaxis, :], np.array([position]), base)[0, 0]


def _softmax_inplace(scores: np.ndarray) -> np.ndarray:
    """Row softmax over the last axis, overwriting `scores`."""
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    return scores


def attend(query, keys, values) -> tuple[np.ndarray, np.ndarray]:
    """softmax(q . K^T / sqrt(d_k)) . V for one query over cached slots."""
    q = np.asarray(query, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if q.ndim != 1 or k.ndim != 2 or v.ndim != 2:
        raise ValueError("attend expects a query vector and slot-major key/value matrices")
    if k.shape[0] == 0:
        raise InvalidStateError("cannot attend over an empty cache")
    if k.shape[0] != v.shape[0]:
        raise ValueError("keys and values must hold the same number of slots")
    if q.shape[0] != k.shape[1]:
        raise ValueError("query dimension does not match key dimension")
    weights = _softmax_inplace(k @ q / np.sqrt(q.shape[0]))
    return weights @ v, weights


@dataclass
class StepOutput:
    logits: np.ndarray  # (vocab_size,), for the final processed position
    attention_weights: list[np.ndarray]  # per layer: (heads, query_rows, cached_slots)


class ToyModel:
    def __init__(self, config: ModelConfig) -> None:
        self.config = config
        rng = np.random.default_rng(config.seed)
        d_model = config.model_dim

        def draw(*shape: int) -> np.ndarray:
            return rng.uniform(WEIGHT_LOW, WEIGHT_HIGH, size=shape)

        self.embedding = draw(config.vocab_size, d_model)
        self.w_q: list[np.ndarray] = []
        self.w_k: list[np.ndarray] = []
        self.w_v: list[np.ndarray] = []
        self.w_o: list[np.ndarray] = []
        for _ in range(config.num_layers):
            self.w_q.append(draw(d_model, config.num_attention_heads * config.head_dim_k))
            self.w_k.append(draw(d_model, config.num_kv_heads * config.head_dim_k))
            self.w_v.append(draw(d_model, config.num_kv_heads * config.head_dim_v))
            self.w_o.append(draw(config.num_attention_heads * config.head_dim_v, d_model))
        self.unembed = draw(d_model, config.vocab_size)


def _validate_tokens(tokens, vocab_size: int) -> np.ndarray:
    ids = np.atleast_1d(np.asarray(tokens, dtype=np.int64))
    if ids.ndim != 1 or ids.shape[0] == 0:
        raise ValueError("tokens must be a nonempty flat sequence")
    if ids.min() < 0 or ids.max() >= vocab_size:
        bad = ids[(ids < 0) | (ids >= vocab_size)][0]
        raise ValueError(f"token id {int(bad)} is outside the vocabulary [0, {vocab_size})")
    return ids


def _forward_cached(
    model: ToyModel, cache: KvCache, tokens
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Process tokens against the cache; returns per-position logits and weights.

    New keys are rotated at absolute positions seen_tokens..seen_tokens+n-1
    and stored post-rotation, so compaction carries whatever rotation a slot
    was given when it entered the cache.
    """
    cfg = model.config
    ids = _validate_tokens(tokens, cfg.vocab_size)
    n = ids.shape[0]
    start = cache.seen_tokens
    positions = np.arange(start, start + n, dtype=np.int64)
    prior_slots = cache.slot_count
    kv = cfg.num_kv_heads
    per_group = cfg.heads_per_kv_group
    scale = np.sqrt(cfg.head_dim_k)
    # query row i may see all prior slots plus new slots up to itself; a
    # single new row sees everything, so it needs no mask at all
    neg_mask = None
    if n > 1:
        hidden = (
            np.arange(prior_slots + n)[None, :]
            >= (prior_slots + 1 + np.arange(n))[:, None]
        )
        neg_mask = np.where(hidden, -np.inf, 0.0)

    h = model.embedding[ids]
    weights_per_layer: list[np.ndarray] = []
    for layer_idx in range(cfg.num_layers):
        q = (h @ model.w_q[layer_idx]).reshape(n, cfg.num_attention_heads, cfg.head_dim_k)
        q = _rotate(q, positions, cfg.rope_base)
        k_new = (h @ model.w_k[layer_idx]).reshape(n, kv, cfg.head_dim_k)
        k_new = _rotate(k_new, positions, cfg.rope_base)
        v_new = (h @ model.w_v[layer_idx]).reshape(n, kv, cfg.head_dim_v)
        keys, values = cache.update(
            layer_idx, k_new.transpose(1, 0, 2), v_new.transpose(1, 0, 2), positions
        )
        # (kv, per_group, n, d_k) @ (kv, 1, d_k, slots) -> (kv, per_group, n, slots)
        qg = np.ascontiguousarray(
            q.reshape(n, kv, per_group, cfg.head_dim_k).transpose(1, 2, 0, 3)
        )
        scores = qg @ keys.transpose(0, 2, 1)[:, None, :, :]
        scores /= scale
        if neg_mask is not None:
            scores += neg_mask[None, None, :, :]
        weights = _softmax_inplace(scores)
        ctx = weights @ values[:, None, :, :]  # (kv, per_group, n, d_v)
        attn = ctx.transpose(2, 0, 1, 3).reshape(
            n, cfg.num_attention_heads * cfg.head_dim_v
        )
        h = h + attn @ model.w_o[layer_idx]
        weights_per_layer.append(
            weights.reshape(cfg.num_attention_heads, n, keys.shape[1])
        )
    return h @ model.unembed, weights_per_layer


def prefill(model: ToyModel, cache: KvCache, tokens) -> StepOutput:
    """Append every input token to the cache and return the last position's logits.

    Addition is unconditional; nothing here consults thresholds.
    """
    logits_all, weights = _forward_cached(model, cache, tokens)
    return StepOutput(logits=logits_all[-1], attention_weights=weights)


def decode_step(model: ToyModel, cache: KvCache, token: int) -> StepOutput:
    """Process one token against the cache, appending one slot per layer."""
    logits_all, weights = _forward_cached(model, cache, [int(token)])
    return StepOutput(logits=logits_all[0], attention_weights=weights)


def greedy_token(logits: np.ndarray) -> int:
    """Argmax with lowest-token-id tie-break."""
    return int(np.argmax(logits))


def full_recompute(model: ToyModel, tokens) -> np.ndarray:
    """No-cache reference: dense causal attention over the whole sequence.

    Deliberately written as a separate, per-head code path (explicit loops,
    inline softmax) so it can cross-check the cached kernel rather than
    share its bugs. Returns logits for every position, (n, vocab_size).
    """
    cfg = model.config
    ids = _validate_tokens(tokens, cfg.vocab_size)
    n = ids.shape[0]
    causal_hidden = np.triu(np.ones((n, n), dtype=bool), k=1)

    h = model.embedding[ids]
    for layer_idx in range(cfg.num_layers):
        q = (h @ model.w_q[layer_idx]).reshape(n, cfg.num_attention_heads, cfg.head_dim_k)
        k = (h @ model.w_k[layer_idx]).reshape(n, cfg.num_kv_heads, cfg.head_dim_k)
        v = (h @ model.w_v[layer_idx]).reshape(n, cfg.num_kv_heads, cfg.head_dim_v)
        for row in range(n):
            for head in range(cfg.num_attention_heads):
                q[row, head] = rope_rotate(q[row, head], row, cfg.rope_base)
            for kv_head in range(cfg.num_kv_heads):
                k[row, kv_head] = rope_rotate(k[row, kv_head], row, cfg.rope_base)
        head_outputs = []
        for head in range(cfg.num_attention_heads):
            group = head * cfg.num_kv_heads // cfg.num_attention_heads
            scores = q[:, head, :] @ k[:, group, :].T / np.sqrt(cfg.head_dim_k)
            scores[causal_hidden] = -np.inf
            e = np.exp(scores - scores.max(axis=1, keepdims=True))
            weights = e / e.sum(axis=1, keepdims=True)
            head_outputs.append(weights @ v[:, group, :])
        attn = np.concatenate(head_outputs, axis=1)
        h = h + attn @ model.w_o[layer_idx]
    return h @ model.unembed
