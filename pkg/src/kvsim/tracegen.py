"""Synthetic conversation-shape generators.

Traces carry token *counts* only; actual token ids are derived from the run
seed at load time, so the files stay tiny and redistribute nothing.
"""

from __future__ import annotations

import json
from pathlib import Path

# (user_tokens, max_new_tokens) per turn. Sized so that a run under the
# llama3-8b footprint preset (0.125 MiB per cached token) crosses a 600 MiB
# threshold on turn 3 or 4 regardless of how many tokens the model actually
# generates: cumulative user tokens alone pass 4800 during turn 4, while the
# worst-case total through turn 3 stays below it. The tail turns add fewer
# tokens than a ~1% eviction removes, so per-turn eviction finally outpaces
# additions once inputs shrink.
PAPER_LIKE_PROFILE = [
    (600, 120),
    (700, 120),
    (1900, 150),
    (1900, 150),
    (850, 120),
]
PAPER_LIKE_TAIL = (16, 16)

UNIFORM_TURN = (100, 50)

SHAPES = ("paper-like", "uniform")


def turn_counts(shape: str, num_turns: int) -> list[tuple[int, int]]:
    if num_turns < 1:
        raise ValueError("num_turns must be at least 1")
    if shape == "paper-like":
        return [
            PAPER_LIKE_PROFILE[i] if i < len(PAPER_LIKE_PROFILE) else PAPER_LIKE_TAIL
            for i in range(num_turns)
        ]
    if shape == "uniform":
        return [UNIFORM_TURN] * num_turns
    raise ValueError(f"unknown trace shape {shape!r}")


def build_trace_spec(shape: str, num_turns: int, seed: int = 0) -> dict:
    """Synthetic trace object: {"id", "turns": [{"user", "gen"}, ...]}."""
    counts = turn_counts(shape, num_turns)
    return {
        "id": f"synthetic-{shape}-{num_turns}t-seed{seed}",
        "turns": [{"user": user, "gen": gen} for user, gen in counts],
    }


def write_trace(path, spec: dict) -> Path:
    """Serialize a trace spec deterministically (same spec, same bytes)."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p
