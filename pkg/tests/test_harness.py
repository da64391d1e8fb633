import csv
import json
from pathlib import Path

import numpy as np
import pytest

from kvsim import (
    AttentionTop,
    CSV_COLUMNS,
    ConversationTrace,
    EvictOldest,
    NoEviction,
    PRESETS,
    RunConfig,
    RunResult,
    SlidingWindowGist,
    TIMING_COLUMNS,
    Turn,
    emit_report,
    footprint,
    load_trace,
    load_traces,
    run_conversation,
    tokenize_text,
)

DATA = Path(__file__).parent / "data"

TOY = PRESETS["toy"]
TOY_TOKEN_BYTES = footprint(TOY, 1).bytes


def toy_run_config(policy, threshold_tokens, **kw):
    return RunConfig(
        model_config=TOY,
        policy=policy,
        threshold_bytes=threshold_tokens * TOY_TOKEN_BYTES,
        **kw,
    )


def synthetic_trace(counts, seed=0):
    """counts: list of (user, gen) pairs, tokens drawn deterministically."""
    rng = np.random.default_rng(seed)
    turns = [
        Turn(rng.integers(0, TOY.vocab_size - 1, size=user).tolist(), gen)
        for user, gen in counts
    ]
    return ConversationTrace(id=f"fixture-{seed}", turns=turns)


class TestTokenizer:
    def test_ascii_golden(self):
        assert tokenize_text("Hello, world!", 257) == [
            72, 101, 108, 108, 111, 44, 32, 119, 111, 114, 108, 100, 33,
        ]

    def test_utf8_multibyte_golden(self):
        assert tokenize_text("é", 257) == [195, 169]

    def test_wraps_at_vocab(self):
        assert tokenize_text("é", 100) == [95, 69]


class TestLoadTraces:
    def test_sharegpt_structure(self):
        traces = load_traces(DATA / "sharegpt_sample.json", "sharegpt")
        assert len(traces) == 2
        first = traces[0]
        assert first.id == "conv-1"
        assert len(first.turns) == 3
        assert first.turns[0].user_tokens == tokenize_text("Hello", 257)
        assert first.turns[0].max_new_tokens == len("Hi!")
        assert first.turns[1].max_new_tokens == len("They store things for reuse.")

    def test_sharegpt_trailing_human_gets_default_budget(self):
        traces = load_traces(DATA / "sharegpt_sample.json", "sharegpt")
        assert traces[1].turns[-1].max_new_tokens == 32

    def test_synthetic_single_object(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"id": "s1", "turns": [{"user": 100, "gen": 50}]}))
        trace = load_trace(p, "synthetic", seed=3)
        assert len(trace.turns) == 1
        assert len(trace.turns[0].user_tokens) == 100
        assert trace.turns[0].max_new_tokens == 50

    def test_synthetic_tokens_deterministic_per_seed(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"id": "s1", "turns": [{"user": 20, "gen": 5}]}))
        a = load_trace(p, "synthetic", seed=9)
        b = load_trace(p, "synthetic", seed=9)
        c = load_trace(p, "synthetic", seed=10)
        assert a.turns[0].user_tokens == b.turns[0].user_tokens
        assert a.turns[0].user_tokens != c.turns[0].user_tokens

    def test_synthetic_avoids_eos(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"id": "s1", "turns": [{"user": 500, "gen": 5}]}))
        trace = load_trace(p, "synthetic", seed=0, vocab_size=257)
        assert max(trace.turns[0].user_tokens) < 256

    def test_malformed_json_names_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"id": "x", "turns": [}')
        with pytest.raises(ValueError, match="line"):
            load_traces(p, "synthetic")

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.json"
        p.write_text("[]")
        with pytest.raises(ValueError):
            load_traces(p, "synthetic")

    def test_unknown_format_rejected(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text("[]")
        with pytest.raises(ValueError):
            load_traces(p, "csv")

    def test_nonpositive_counts_rejected(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"id": "s", "turns": [{"user": 0, "gen": 5}]}))
        with pytest.raises(ValueError):
            load_traces(p, "synthetic")


class TestRunConversation:
    def test_single_turn_starts_empty(self):
        trace = synthetic_trace([(10, 4)])
        metrics = run_conversation(toy_run_config(NoEviction(), 1000), trace)
        assert len(metrics) == 1
        m = metrics[0]
        assert m.cache_bytes_pre_turn == 0
        assert m.cache_bytes_post_prefill == 10 * TOY_TOKEN_BYTES
        assert m.seen_tokens_end == 10 + m.generated_tokens

    def test_baseline_slot_count_is_cumulative_token_sum(self):
        trace = synthetic_trace([(12, 6), (9, 4), (30, 8)])
        metrics = run_conversation(toy_run_config(NoEviction(), 10**6), trace)
        cumulative = 0
        for m, turn in zip(metrics, trace.turns):
            cumulative += len(turn.user_tokens) + m.generated_tokens
            assert m.seen_tokens_end == cumulative
            assert m.cache_bytes_end_generation == cumulative * TOY_TOKEN_BYTES

    def test_byte_accounting_identity_every_turn(self):
        trace = synthetic_trace([(40, 10), (40, 10), (40, 10), (40, 10)])
        rc = toy_run_config(EvictOldest(48), 64, per_generated_token=False)
        metrics = run_conversation(rc, trace)
        for m, turn in zip(metrics, trace.turns):
            expected = (
                m.cache_bytes_pre_turn
                - m.tokens_evicted_pre_turn * TOY_TOKEN_BYTES
                + len(turn.user_tokens) * TOY_TOKEN_BYTES
            )
            assert m.cache_bytes_post_prefill == expected

    def test_prefill_is_unconditional(self):
        # cache at 90% of the threshold; the prefill must push it over
        trace = synthetic_trace([(90, 1), (50, 1)])
        rc = toy_run_config(EvictOldest(80), 100, per_generated_token=False)
        metrics = run_conversation(rc, trace)
        assert metrics[0].tokens_evicted_pre_turn == 0
        threshold = rc.threshold_bytes
        assert metrics[0].cache_bytes_end_generation <= threshold
        assert metrics[1].tokens_evicted_pre_turn == 0  # still at/below trigger
        assert metrics[1].cache_bytes_post_prefill > threshold

    def test_unreachable_threshold_behaves_like_baseline(self):
        trace = synthetic_trace([(15, 5), (10, 5)], seed=4)
        base = run_conversation(toy_run_config(NoEviction(), 10**6), trace)
        top = run_conversation(toy_run_config(AttentionTop(0.5), 10**6), trace)
        for a, b in zip(base, top):
            assert a.seen_tokens_end == b.seen_tokens_end
            assert a.generated_tokens == b.generated_tokens
            assert a.cache_bytes_end_generation == b.cache_bytes_end_generation
            assert a.tokens_evicted_pre_turn == b.tokens_evicted_pre_turn == 0

    def test_per_token_checkpoint_bounds_cache(self):
        counts = [(32, 20)] * 6
        trace = synthetic_trace(counts, seed=2)
        rc = toy_run_config(EvictOldest(48), 64)  # both checkpoints on
        metrics = run_conversation(rc, trace)
        bound = (64 + 32 + 1) * TOY_TOKEN_BYTES
        for m in metrics:
            assert m.cache_bytes_post_prefill <= bound
            assert m.cache_bytes_end_generation <= bound

    def test_determinism_at_token_level(self):
        trace = synthetic_trace([(25, 10), (15, 10)], seed=8)
        rc = toy_run_config(AttentionTop(0.9), 30, seed=5)
        a = run_conversation(rc, trace)
        b = run_conversation(rc, trace)
        for ma, mb in zip(a, b):
            assert ma.generated_tokens == mb.generated_tokens
            assert ma.seen_tokens_end == mb.seen_tokens_end
            assert ma.positional == mb.positional

    def test_baseline_extrapolates_past_max_position(self):
        # toy max_position is 256; three 120-token turns cross it
        trace = synthetic_trace([(120, 2), (120, 2), (120, 2)])
        metrics = run_conversation(toy_run_config(NoEviction(), 10**9), trace)
        crossed = [m.positional.extrapolated_slots > 0 for m in metrics]
        assert crossed == [False, False, True] or crossed == [False, True, True]
        last = metrics[-1]
        assert last.positional.extrapolated_slots == last.seen_tokens_end - TOY.max_position

    def test_gist_keeps_reports_contiguous(self):
        trace = synthetic_trace([(60, 5)] * 4)
        rc = toy_run_config(SlidingWindowGist(40, 0), 100, per_generated_token=False)
        metrics = run_conversation(rc, trace)
        for m in metrics:
            assert m.positional.discontinuities == 0

    def test_evict_oldest_appends_report_distortion(self):
        trace = synthetic_trace([(80, 5), (80, 5), (80, 5)])
        rc = toy_run_config(EvictOldest(100), 120, per_generated_token=False)
        metrics = run_conversation(rc, trace)
        assert metrics[-1].tokens_evicted_pre_turn > 0
        assert metrics[-1].positional.mean_distance_distortion > 0


class TestEmitReport:
    def run_results(self, tmp_path, counts=((20, 5), (20, 5)), policy=None, seed=0):
        policy = policy or NoEviction()
        trace = synthetic_trace(list(counts), seed=seed)
        rc = toy_run_config(policy, 1000, seed=seed)
        metrics = run_conversation(rc, trace)
        return [
            RunResult(
                run_id=f"{trace.id}__{policy.label}",
                strategy=policy.label,
                turns=metrics,
                trace_id=trace.id,
            )
        ]

    def test_header_only_for_empty_results(self, tmp_path):
        csv_path, summary_path = emit_report([], tmp_path)
        rows = list(csv.reader(csv_path.open()))
        assert rows == [CSV_COLUMNS]
        assert json.loads(summary_path.read_text()) == {}

    def test_row_count_equals_total_turns(self, tmp_path):
        results = self.run_results(tmp_path, counts=((20, 5), (15, 5), (10, 5)))
        csv_path, _ = emit_report(results, tmp_path)
        with csv_path.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        assert [r["turn"] for r in rows] == ["1", "2", "3"]
        assert set(rows[0]) == set(CSV_COLUMNS)

    def test_rerun_reproduces_csv_modulo_timing(self, tmp_path):
        def non_timing_cells(directory):
            path, _ = emit_report(
                self.run_results(tmp_path, policy=AttentionTop(0.9), seed=6), directory
            )
            with path.open() as fh:
                rows = list(csv.DictReader(fh))
            return [
                {k: v for k, v in row.items() if k not in TIMING_COLUMNS}
                for row in rows
            ]

        assert non_timing_cells(tmp_path / "a") == non_timing_cells(tmp_path / "b")

    def test_summary_contents(self, tmp_path):
        results = self.run_results(tmp_path)
        _, summary_path = emit_report(results, tmp_path)
        summary = json.loads(summary_path.read_text())
        entry = summary[results[0].run_id]
        assert entry["strategy"] == "baseline"
        assert entry["turns"] == 2
        assert entry["max_discontinuities"] == 0
        assert entry["mean_contiguity"] == 1.0


class TestRunConfigValidation:
    def test_threshold_required_for_evicting_policies(self):
        with pytest.raises(ValueError):
            RunConfig(model_config=TOY, policy=EvictOldest(10), threshold_bytes=0)

    def test_zero_threshold_fine_for_baseline(self):
        RunConfig(model_config=TOY, policy=NoEviction(), threshold_bytes=0)

    def test_sim_config_defaults_to_model_config(self):
        rc = RunConfig(model_config=TOY, policy=NoEviction(), threshold_bytes=0, seed=7)
        assert rc.resolved_sim_config() == TOY.with_seed(7)
