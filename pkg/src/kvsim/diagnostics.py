"""Survivor-position statistics: gaps, inversions, and extrapolation.

After compaction the model addresses slots by index while each slot still
carries the rotation of the position it originally entered at. These
metrics quantify how far apart those two views have drifted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class PositionalDiagnostics:
    discontinuities: int  # adjacent pairs missing at least one token between them
    max_gap: int  # largest count of tokens missing between neighbors
    contiguity_ratio: float  # fraction of adjacent pairs with nothing missing
    extrapolated_slots: int  # slots rotated at positions >= max_position
    mean_distance_distortion: float  # mean |original distance - index distance|


def position_diagnostics(positions, max_position: int) -> PositionalDiagnostics:
    """Tolerant core computation over an arbitrary position sequence.

    Appending after an eviction legitimately produces positions that repeat
    or run backwards; those pairs are never contiguous and show up in the
    distortion mean (|delta - 1| >= 1), which is how inversions get reported.
    """
    if max_position <= 0:
        raise ValueError("max_position must be positive")
    pos = np.asarray(positions, dtype=np.int64)
    extrapolated = int(np.count_nonzero(pos >= max_position))
    if pos.size < 2:
        return PositionalDiagnostics(0, 0, 1.0, extrapolated, 0.0)
    delta = np.diff(pos)
    gaps = delta - 1  # tokens missing between neighbors; negative on inversion
    return PositionalDiagnostics(
        discontinuities=int(np.count_nonzero(gaps > 0)),
        max_gap=int(max(int(gaps.max()), 0)),
        contiguity_ratio=float(np.count_nonzero(gaps == 0) / gaps.size),
        extrapolated_slots=extrapolated,
        mean_distance_distortion=float(np.abs(gaps).mean()),
    )


def gap_stats(original_positions, max_position: int) -> PositionalDiagnostics:
    """Diagnostics over a strictly increasing survivor-position sequence."""
    pos = np.asarray(original_positions, dtype=np.int64)
    if pos.size >= 2 and np.any(np.diff(pos) <= 0):
        raise ValueError("original_positions must be strictly increasing")
    return position_diagnostics(pos, max_position)


@dataclass(frozen=True)
class TimelineSummary:
    turns: int
    max_discontinuities: int
    first_extrapolation_turn: Optional[int]  # 1-based position in the input
    mean_contiguity: float


def fidelity_timeline(per_turn: Iterable[PositionalDiagnostics]) -> TimelineSummary:
    """Aggregate per-turn diagnostics; empty input yields a zeroed summary."""
    items = list(per_turn)
    if not items:
        return TimelineSummary(0, 0, None, 0.0)
    first_extrapolation = None
    for turn_number, diag in enumerate(items, start=1):
        if diag.extrapolated_slots > 0:
            first_extrapolation = turn_number
            break
    return TimelineSummary(
        turns=len(items),
        max_discontinuities=max(d.discontinuities for d in items),
        first_extrapolation_turn=first_extrapolation,
        mean_contiguity=float(np.mean([d.contiguity_ratio for d in items])),
    )
