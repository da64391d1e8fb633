import math

import numpy as np
import pytest

from kvsim import PRESETS, ToyModel, rope_rotate


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {outcome}")


@pytest.fixture(scope="session")
def toy_config():
    return PRESETS["toy"]


@pytest.fixture(scope="session")
def toy_model(toy_config):
    return ToyModel(toy_config)


def reference_forward(model, tokens):
    """Independent forward pass: explicit per-token, per-head scalar loops.

    Returns (logits for every position, per-layer weight matrices shaped
    (heads, rows, rows)). Slow on purpose; only for small oracles.
    """
    cfg = model.config
    n = len(tokens)
    h = [np.array(model.embedding[t]) for t in tokens]
    all_weights = []
    for layer in range(cfg.num_layers):
        qs, ks, vs = [], [], []
        for i, hi in enumerate(h):
            q = (hi @ model.w_q[layer]).reshape(cfg.num_attention_heads, cfg.head_dim_k)
            k = (hi @ model.w_k[layer]).reshape(cfg.num_kv_heads, cfg.head_dim_k)
            v = (hi @ model.w_v[layer]).reshape(cfg.num_kv_heads, cfg.head_dim_v)
            qs.append(
                np.stack(
                    [rope_rotate(q[head], i, cfg.rope_base) for head in range(cfg.num_attention_heads)]
                )
            )
            ks.append(
                np.stack(
                    [rope_rotate(k[g], i, cfg.rope_base) for g in range(cfg.num_kv_heads)]
                )
            )
            vs.append(v)
        layer_weights = np.zeros((cfg.num_attention_heads, n, n))
        new_h = []
        for i in range(n):
            heads_out = []
            for head in range(cfg.num_attention_heads):
                g = head * cfg.num_kv_heads // cfg.num_attention_heads
                scores = np.array(
                    [qs[i][head] @ ks[j][g] for j in range(i + 1)]
                ) / math.sqrt(cfg.head_dim_k)
                e = np.exp(scores - scores.max())
                w = e / e.sum()
                layer_weights[head, i, : i + 1] = w
                heads_out.append(sum(w[j] * vs[j][g] for j in range(i + 1)))
            attn = np.concatenate(heads_out)
            new_h.append(h[i] + attn @ model.w_o[layer])
        h = new_h
        all_weights.append(layer_weights)
    logits = np.stack([hi @ model.unembed for hi in h])
    return logits, all_weights
