# SPDX-License-Identifier: Apache-2.0
"""One-off generator for the committed skewed fixture bundle.

Writes tests/fixtures/skewed/: the same tiny topology as the trained fixture,
but with heavy-tailed (log-normal magnitude) weights planted in two attention
projections. Query/key projections are used so the planted scale perturbs
only attention logits (softmax-bounded) and never inflates the activation
scale feeding any other prunable layer.

The planted scale is chosen so that, at 70% sparsity with the activation-norm
metric, skew-aware allocation reconstructs better than both the uniform and
the single-global-threshold baselines; the acceptance suite re-checks that
inequality against the committed bytes.
"""

import json
import sys
from pathlib import Path

import numpy as np

VOCAB = 64
D_MODEL = 32
N_HEADS = 2
N_BLOCKS = 2
D_MLP = 64
MAX_SEQ = 64

SEED = 7180
GAUSS_STD = 0.15
HEAVY_SIGMA = 1.5
HEAVY_SCALE = 0.12
HEAVY_LAYERS = {"block0.attn_q", "block1.attn_k"}


def layer_shapes():
    shapes = []
    for b in range(N_BLOCKS):
        p = f"block{b}"
        shapes += [
            (f"{p}.ln1.scale", "norm_scale", (D_MODEL,)),
            (f"{p}.ln1.bias", "norm_bias", (D_MODEL,)),
            (f"{p}.attn_q", "attention_q", (D_MODEL, D_MODEL)),
            (f"{p}.attn_k", "attention_k", (D_MODEL, D_MODEL)),
            (f"{p}.attn_v", "attention_v", (D_MODEL, D_MODEL)),
            (f"{p}.attn_o", "attention_o", (D_MODEL, D_MODEL)),
            (f"{p}.ln2.scale", "norm_scale", (D_MODEL,)),
            (f"{p}.ln2.bias", "norm_bias", (D_MODEL,)),
            (f"{p}.mlp_in", "mlp_in", (D_MLP, D_MODEL)),
            (f"{p}.mlp_out", "mlp_out", (D_MODEL, D_MLP)),
        ]
    return shapes


def make_tensor(name, kind, shape, rng):
    if kind == "norm_scale":
        return np.ones(shape, dtype=np.float64)
    if kind == "norm_bias":
        return np.zeros(shape, dtype=np.float64)
    if name in HEAVY_LAYERS:
        sign = rng.choice([-1.0, 1.0], size=shape)
        return sign * HEAVY_SCALE * np.exp(HEAVY_SIGMA * rng.standard_normal(shape))
    return GAUSS_STD * rng.standard_normal(shape)


def main():
    fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    out_dir = fixtures / "skewed"
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    entries = [("embedding", "embedding", (VOCAB, D_MODEL))]
    entries += layer_shapes()
    entries += [
        ("final_norm.scale", "norm_scale", (D_MODEL,)),
        ("final_norm.bias", "norm_bias", (D_MODEL,)),
        ("head", "head", (VOCAB, D_MODEL)),
    ]

    table = []
    blob = bytearray()
    for name, kind, shape in entries:
        if kind in ("embedding", "head"):
            data = 0.5 * rng.standard_normal(shape)
        else:
            data = make_tensor(name, kind, shape, rng)
        data = data.astype("<f4")
        table.append({
            "name": name,
            "kind": kind,
            "shape": list(data.shape),
            "byte_offset": len(blob),
        })
        blob += data.tobytes()

    manifest = {
        "format_version": 1,
        "tied_head": False,
        "topology": {
            "vocab_size": VOCAB,
            "d_model": D_MODEL,
            "n_heads": N_HEADS,
            "n_blocks": N_BLOCKS,
            "d_mlp": D_MLP,
            "max_seq_len": MAX_SEQ,
        },
        "tensors": table,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out_dir / "tensors.bin").write_bytes(bytes(blob))
    print("wrote", out_dir)


if __name__ == "__main__":
    sys.exit(main())
