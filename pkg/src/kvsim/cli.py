"""Command-line front door: benchmark runs, footprint math, trace tooling."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .cache import MIB, footprint
from .config import PRESETS, ModelConfig
from .diagnostics import gap_stats
from .errors import InvalidStateError
from .harness import RunConfig, RunResult, emit_report, load_traces, run_conversation
from .policies import AttentionTop, EvictOldest, NoEviction, SlidingWindowGist
from .tracegen import SHAPES, build_trace_spec, write_trace

STRATEGIES = ("baseline", "evict-oldest", "sliding-window-gist", "attention-top")

# effective values when the matching strategy is selected and the flag is absent
DEFAULT_KEEP_RATIO = 0.99
DEFAULT_GIST_TOKENS = 2000
DEFAULT_RECENT_TOKENS = 0
DEFAULT_WINDOW_TOKENS = 4000


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kvsim",
        description="Simulate multi-turn KV-cache management over conversation traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark over a trace file")
    run.add_argument("--strategy", choices=STRATEGIES, required=True,
                     help="cache management strategy (required)")
    run.add_argument("--threshold-mb", type=float, default=600.0,
                     help="eviction trigger in MiB (default: 600.0)")
    run.add_argument("--keep-ratio", type=float, default=None,
                     help="attention-top retention ratio in (0, 1] "
                          f"(default: {DEFAULT_KEEP_RATIO}; attention-top only)")
    run.add_argument("--gist-tokens", type=int, default=None,
                     help="initial tokens retained by sliding-window-gist "
                          f"(default: {DEFAULT_GIST_TOKENS}; sliding-window-gist only)")
    run.add_argument("--recent-tokens", type=int, default=None,
                     help="recent tokens retained by sliding-window-gist "
                          f"(default: {DEFAULT_RECENT_TOKENS}; sliding-window-gist only)")
    run.add_argument("--window-tokens", type=int, default=None,
                     help="window size for evict-oldest "
                          f"(default: {DEFAULT_WINDOW_TOKENS}; evict-oldest only)")
    run.add_argument("--preset", choices=sorted(PRESETS), default="toy",
                     help="footprint/accounting preset (default: toy)")
    run.add_argument("--trace", required=True, help="trace file path (required)")
    run.add_argument("--format", choices=("sharegpt", "synthetic"), default="synthetic",
                     help="trace file format (default: synthetic)")
    run.add_argument("--seed", type=int, default=0,
                     help="run seed for weights and synthetic tokens (default: 0)")
    run.add_argument("--out", default=None,
                     help="report directory (default: $KVSIM_OUT or ./kvsim-out)")
    run.add_argument("--checkpoints", choices=("pre", "per-token", "both"),
                     default="both",
                     help="when eviction may trigger (default: both)")
    run.set_defaults(func=cmd_run)

    fp = sub.add_parser("footprint", help="compute cache bytes for a token count")
    fp.add_argument("--preset", choices=sorted(PRESETS), default=None,
                    help="model preset (default: none; give explicit dims instead)")
    fp.add_argument("--layers", type=int, default=None,
                    help="layer count (default: from preset)")
    fp.add_argument("--kv-heads", type=int, default=None,
                    help="KV head count (default: from preset)")
    fp.add_argument("--head-dim", type=int, default=None,
                    help="key head dimension (default: from preset)")
    fp.add_argument("--bytes-per-el", type=int, default=2,
                    help="bytes per stored element (default: 2)")
    fp.add_argument("--tokens", type=int, required=True,
                    help="cached token count (required)")
    fp.set_defaults(func=cmd_footprint)

    tg = sub.add_parser("trace-gen", help="write a synthetic trace file")
    tg.add_argument("--turns", type=int, default=10,
                    help="number of turns (default: 10)")
    tg.add_argument("--shape", choices=SHAPES, default="paper-like",
                    help="turn-size profile (default: paper-like)")
    tg.add_argument("--seed", type=int, default=0,
                    help="seed recorded in the trace id (default: 0)")
    tg.add_argument("--out", default="trace.json",
                    help="output file (default: trace.json)")
    tg.set_defaults(func=cmd_trace_gen)

    dg = sub.add_parser("diag", help="positional diagnostics for a survivor-position list")
    dg.add_argument("--positions", required=True,
                    help="comma-separated strictly increasing positions (required)")
    dg.add_argument("--max-position", type=int, default=8192,
                    help="architectural context window (default: 8192)")
    dg.set_defaults(func=cmd_diag)

    return parser


def _build_policy(args, parser: argparse.ArgumentParser):
    s = args.strategy
    if s != "attention-top" and args.keep_ratio is not None:
        parser.error("--keep-ratio is only valid with --strategy attention-top")
    if s != "sliding-window-gist" and args.gist_tokens is not None:
        parser.error("--gist-tokens is only valid with --strategy sliding-window-gist")
    if s != "sliding-window-gist" and args.recent_tokens is not None:
        parser.error("--recent-tokens is only valid with --strategy sliding-window-gist")
    if s != "evict-oldest" and args.window_tokens is not None:
        parser.error("--window-tokens is only valid with --strategy evict-oldest")
    try:
        if s == "baseline":
            return NoEviction()
        if s == "evict-oldest":
            window = args.window_tokens if args.window_tokens is not None else DEFAULT_WINDOW_TOKENS
            return EvictOldest(window_tokens=window)
        if s == "sliding-window-gist":
            gist = args.gist_tokens if args.gist_tokens is not None else DEFAULT_GIST_TOKENS
            recent = args.recent_tokens if args.recent_tokens is not None else DEFAULT_RECENT_TOKENS
            return SlidingWindowGist(gist_token_count=gist, recent_token_count=recent)
        ratio = args.keep_ratio if args.keep_ratio is not None else DEFAULT_KEEP_RATIO
        return AttentionTop(keep_ratio=ratio)
    except ValueError as e:
        parser.error(str(e))


def cmd_run(args, parser: argparse.ArgumentParser) -> int:
    policy = _build_policy(args, parser)
    if args.threshold_mb <= 0 and not isinstance(policy, NoEviction):
        parser.error("--threshold-mb must be positive for evicting strategies")
    acct = PRESETS[args.preset]
    # llama presets carry full-size cache geometry for the accounting; the
    # simulation itself always steps the toy-dimension model
    sim = None if args.preset == "toy" else PRESETS["toy"]
    out_dir = Path(args.out if args.out is not None else os.environ.get("KVSIM_OUT", "kvsim-out"))
    run_config = RunConfig(
        model_config=acct,
        policy=policy,
        threshold_bytes=int(args.threshold_mb * MIB),
        sim_config=sim,
        before_prefill=args.checkpoints in ("pre", "both"),
        per_generated_token=args.checkpoints in ("per-token", "both"),
        seed=args.seed,
        out_dir=out_dir,
    )
    vocab = run_config.resolved_sim_config().vocab_size
    traces = load_traces(args.trace, args.format, seed=args.seed, vocab_size=vocab)
    results = []
    for trace in traces:
        metrics = run_conversation(run_config, trace)
        results.append(
            RunResult(
                run_id=f"{trace.id}__{policy.label}",
                strategy=policy.label,
                turns=metrics,
                trace_id=trace.id,
            )
        )
    for path in emit_report(results, out_dir):
        print(f"wrote {path}")
    return 0


def cmd_footprint(args, parser: argparse.ArgumentParser) -> int:
    if args.preset is not None:
        cfg = PRESETS[args.preset]
        layers = args.layers if args.layers is not None else cfg.num_layers
        kv_heads = args.kv_heads if args.kv_heads is not None else cfg.num_kv_heads
        head_dim = args.head_dim if args.head_dim is not None else cfg.head_dim_k
    else:
        if args.layers is None or args.kv_heads is None or args.head_dim is None:
            parser.error("--layers, --kv-heads and --head-dim are required without --preset")
        layers, kv_heads, head_dim = args.layers, args.kv_heads, args.head_dim
    for name, value in (("--layers", layers), ("--kv-heads", kv_heads),
                        ("--head-dim", head_dim), ("--bytes-per-el", args.bytes_per_el),
                        ("--tokens", args.tokens)):
        if value <= 0:
            parser.error(f"{name} must be positive")
    if head_dim % 2 != 0:
        parser.error("--head-dim must be even")
    cfg = ModelConfig(
        num_layers=layers,
        num_attention_heads=kv_heads,
        num_kv_heads=kv_heads,
        head_dim_k=head_dim,
        head_dim_v=head_dim,
        vocab_size=1,
        max_position=1,
        bytes_per_element=args.bytes_per_el,
    )
    report = footprint(cfg, args.tokens)
    print(f"tokens: {args.tokens}")
    print(f"elements: {report.elements}")
    print(f"bytes: {report.bytes}")
    print(f"mib: {report.megabytes}")
    return 0


def cmd_trace_gen(args, parser: argparse.ArgumentParser) -> int:
    if args.turns < 1:
        parser.error("--turns must be at least 1")
    spec = build_trace_spec(args.shape, args.turns, args.seed)
    path = write_trace(args.out, spec)
    print(f"wrote {path}")
    return 0


def cmd_diag(args, parser: argparse.ArgumentParser) -> int:
    try:
        positions = [int(p) for p in args.positions.split(",") if p.strip() != ""]
    except ValueError:
        parser.error("--positions must be a comma-separated list of integers")
    if args.max_position < 1:
        parser.error("--max-position must be positive")
    try:
        diag = gap_stats(positions, args.max_position)
    except ValueError as e:
        parser.error(f"--positions: {e}")
    print(f"discontinuities: {diag.discontinuities}")
    print(f"max_gap: {diag.max_gap}")
    print(f"contiguity_ratio: {diag.contiguity_ratio}")
    print(f"extrapolated_slots: {diag.extrapolated_slots}")
    print(f"mean_distance_distortion: {diag.mean_distance_distortion}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ValueError, OSError, InvalidStateError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
