"""Model geometry and the byte-accounting presets."""

from __future__ import annotations

from dataclasses import dataclass, replace

_POSITIVE_FIELDS = (
    "num_layers",
    "num_attention_heads",
    "num_kv_heads",
    "head_dim_k",
    "head_dim_v",
    "vocab_size",
    "max_position",
    "bytes_per_element",
)


@dataclass(frozen=True)
class ModelConfig:
    """Layer/head/dimension parameters for a toy attention stack.

    The same numbers drive two things: the shapes of the seeded toy model
    and the cache byte arithmetic (2 * layers * kv_heads * tokens * head_dim_k
    * bytes_per_element).
    """

    num_layers: int
    num_attention_heads: int
    num_kv_heads: int
    head_dim_k: int
    head_dim_v: int
    vocab_size: int
    max_position: int
    bytes_per_element: int = 2
    rope_base: float = 10000.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in _POSITIVE_FIELDS:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.num_attention_heads % self.num_kv_heads != 0:
            raise ValueError("num_attention_heads must be divisible by num_kv_heads")
        if self.head_dim_k % 2 != 0:
            raise ValueError("head_dim_k must be even (rotation acts on feature pairs)")
        if self.rope_base <= 0:
            raise ValueError("rope_base must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit an unsigned 64-bit integer")

    @property
    def model_dim(self) -> int:
        return self.num_attention_heads * self.head_dim_v

    @property
    def heads_per_kv_group(self) -> int:
        return self.num_attention_heads // self.num_kv_heads

    @property
    def eos_token_id(self) -> int:
        return self.vocab_size - 1

    def with_seed(self, seed: int) -> "ModelConfig":
        return replace(self, seed=seed)


# The llama presets carry the published cache geometry of the corresponding
# models so the byte arithmetic comes out right; any ToyModel built from them
# still gets seeded random weights. Vocab is kept at the toy 257 so traces
# tokenize identically under every preset. The benchmark harness pairs the
# llama presets with toy simulation dimensions (see harness.RunConfig).
PRESETS: dict[str, ModelConfig] = {
    "toy": ModelConfig(
        num_layers=2,
        num_attention_heads=4,
        num_kv_heads=2,
        head_dim_k=16,
        head_dim_v=16,
        vocab_size=257,
        max_position=256,
    ),
    "llama3-8b": ModelConfig(
        num_layers=32,
        num_attention_heads=32,
        num_kv_heads=8,
        head_dim_k=128,
        head_dim_v=128,
        vocab_size=257,
        max_position=8192,
    ),
    "llama2-7b": ModelConfig(
        num_layers=32,
        num_attention_heads=32,
        num_kv_heads=32,
        head_dim_k=128,
        head_dim_v=128,
        vocab_size=257,
        max_position=4096,
    ),
}
