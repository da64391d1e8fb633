import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvsim import (
    PositionalDiagnostics,
    fidelity_timeline,
    gap_stats,
    position_diagnostics,
)


class TestGapStats:
    def test_contiguous_prefix(self):
        d = gap_stats([0, 1, 2, 3], 8192)
        assert d.discontinuities == 0
        assert d.max_gap == 0
        assert d.contiguity_ratio == 1.0
        assert d.extrapolated_slots == 0
        assert d.mean_distance_distortion == 0.0

    def test_hand_worked_gaps(self):
        d = gap_stats([0, 1, 5, 6, 9], 8192)
        assert d.discontinuities == 2
        assert d.max_gap == 3  # between 1 and 5
        assert d.contiguity_ratio == 0.5
        assert d.mean_distance_distortion == pytest.approx((0 + 3 + 0 + 2) / 4)

    def test_extrapolated_slot_count(self):
        d = gap_stats([8190, 8191, 8192, 8193], 8192)
        assert d.extrapolated_slots == 2
        assert d.discontinuities == 0

    def test_fewer_than_two_slots(self):
        for positions in ([], [5]):
            d = gap_stats(positions, 100)
            assert d == PositionalDiagnostics(0, 0, 1.0, 0, 0.0)

    def test_single_extrapolated_slot(self):
        assert gap_stats([200], 100).extrapolated_slots == 1

    def test_non_monotone_rejected(self):
        with pytest.raises(ValueError):
            gap_stats([0, 2, 1], 100)
        with pytest.raises(ValueError):
            gap_stats([0, 0], 100)

    def test_invalid_max_position(self):
        with pytest.raises(ValueError):
            gap_stats([0, 1], 0)

    @given(
        positions=st.lists(
            st.integers(min_value=0, max_value=10_000), min_size=2, max_size=60, unique=True
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_invariant_links(self, positions):
        pos = sorted(positions)
        d = gap_stats(pos, 10_001)
        if d.discontinuities == 0:
            assert d.max_gap == 0
            assert d.contiguity_ratio == 1.0
        assert d.max_gap >= 0
        assert 0.0 <= d.contiguity_ratio <= 1.0
        assert d.mean_distance_distortion >= 0.0


class TestTolerantDiagnostics:
    def test_inversion_counts_as_distortion(self):
        # eviction kept a suffix, then appends resumed from the rewound counter
        d = position_diagnostics([3, 4, 5, 6, 7, 5, 6], 100)
        assert d.mean_distance_distortion > 0
        assert d.contiguity_ratio < 1.0

    def test_duplicate_position_not_contiguous(self):
        d = position_diagnostics([1, 1], 100)
        assert d.contiguity_ratio == 0.0
        assert d.discontinuities == 0  # a repeat is an inversion, not a gap
        assert d.mean_distance_distortion == pytest.approx(1.0)

    def test_matches_gap_stats_on_monotone_input(self):
        pos = [0, 4, 5, 9]
        assert position_diagnostics(pos, 50) == gap_stats(pos, 50)


class TestFidelityTimeline:
    def test_empty_input(self):
        summary = fidelity_timeline([])
        assert summary.turns == 0
        assert summary.max_discontinuities == 0
        assert summary.first_extrapolation_turn is None

    def test_single_turn_matches_its_values(self):
        d = gap_stats([0, 1, 5], 100)
        summary = fidelity_timeline([d])
        assert summary.turns == 1
        assert summary.max_discontinuities == d.discontinuities
        assert summary.mean_contiguity == d.contiguity_ratio
        assert summary.first_extrapolation_turn is None

    def test_all_contiguous_run(self):
        diags = [gap_stats(list(range(n)), 100) for n in (3, 5, 9)]
        summary = fidelity_timeline(diags)
        assert summary.mean_contiguity == 1.0
        assert summary.first_extrapolation_turn is None

    def test_first_extrapolation_turn(self):
        diags = [
            gap_stats([0, 1], 3),
            gap_stats([0, 1, 2], 3),
            gap_stats([0, 1, 2, 3], 3),  # position 3 >= max_position 3
            gap_stats([0, 1, 2, 3, 4], 3),
        ]
        summary = fidelity_timeline(diags)
        assert summary.first_extrapolation_turn == 3
        assert summary.turns == 4

    def test_mean_contiguity(self):
        diags = [gap_stats([0, 1, 2], 10), gap_stats([0, 2, 4], 10)]
        assert fidelity_timeline(diags).mean_contiguity == pytest.approx(0.5)
