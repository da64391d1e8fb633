import json

import pytest

from kvsim import PRESETS, build_trace_spec, footprint, load_traces, turn_counts, write_trace
from kvsim.tracegen import PAPER_LIKE_PROFILE, PAPER_LIKE_TAIL


def test_uniform_counts():
    assert turn_counts("uniform", 3) == [(100, 50)] * 3


def test_paper_like_profile_then_tail():
    counts = turn_counts("paper-like", 8)
    assert counts[:5] == PAPER_LIKE_PROFILE
    assert counts[5:] == [PAPER_LIKE_TAIL] * 3


def test_unknown_shape_rejected():
    with pytest.raises(ValueError):
        turn_counts("bursty", 3)


def test_turns_must_be_positive():
    with pytest.raises(ValueError):
        turn_counts("uniform", 0)


def test_round_trip_through_loader(tmp_path):
    spec = build_trace_spec("uniform", 1, seed=3)
    path = write_trace(tmp_path / "t.json", spec)
    traces = load_traces(path, "synthetic", seed=3)
    assert len(traces) == 1
    assert len(traces[0].turns) == 1
    assert len(traces[0].turns[0].user_tokens) == 100
    assert traces[0].turns[0].max_new_tokens == 50


def test_same_seed_writes_identical_bytes(tmp_path):
    a = write_trace(tmp_path / "a.json", build_trace_spec("paper-like", 10, seed=7))
    b = write_trace(tmp_path / "b.json", build_trace_spec("paper-like", 10, seed=7))
    assert a.read_bytes() == b.read_bytes()


def test_different_seed_changes_id(tmp_path):
    a = build_trace_spec("paper-like", 10, seed=7)
    b = build_trace_spec("paper-like", 10, seed=8)
    assert a["id"] != b["id"]
    assert a["turns"] == b["turns"]


def test_paper_like_user_tokens_cross_600_mib_in_turn_4():
    # worst case (no generation): cumulative user tokens alone must cross the
    # 4800-token equivalent of 600 MiB during turn 4, not before
    per_token_mib = footprint(PRESETS["llama3-8b"], 1).megabytes
    cumulative = 0.0
    crossings = []
    for user, gen in turn_counts("paper-like", 10):
        cumulative += user * per_token_mib
        crossings.append(cumulative > 600.0)
    assert crossings.index(True) == 3  # 0-based turn 4

    # best case (full generation budget) must not cross before turn 4
    cumulative = 0.0
    for user, gen in turn_counts("paper-like", 3):
        cumulative += (user + gen) * per_token_mib
    assert cumulative < 600.0


def test_written_file_is_valid_json(tmp_path):
    path = write_trace(tmp_path / "t.json", build_trace_spec("uniform", 2, seed=0))
    data = json.loads(path.read_text())
    assert data["turns"] == [{"user": 100, "gen": 50}, {"user": 100, "gen": 50}]
