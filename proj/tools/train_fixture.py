# SPDX-License-Identifier: Apache-2.0
"""One-off trainer for the committed tiny-LM fixture.

Trains a 2-block decoder on a synthetic Markov corpus and writes
  tests/fixtures/tinylm/{manifest.json,tensors.bin}
  tests/fixtures/corpus_train.bin (not committed; reproducible from the seed)
  tests/fixtures/corpus_calib.bin
  tests/fixtures/corpus_eval.bin

The module mirrors the library's forward pass exactly: no positional
embeddings (the per-position bigram path suffices for a Markov source),
pre-norm blocks, layer-norm eps 1e-5, tanh GELU with the library's pinned
constants, untied output head.
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

VOCAB = 64
D_MODEL = 32
N_HEADS = 2
N_BLOCKS = 2
D_MLP = 64
MAX_SEQ = 64

GELU_C0 = 0.7978845608
GELU_C1 = 0.044715
LN_EPS = 1e-5

STEPS = 3000
BATCH = 32
LR = 3e-3
SEED = 20240811

# L1 pull on the MLP matrices. Drives their magnitude distributions
# heavy-tailed (a few large carrier weights over a near-zero bulk), which
# makes the MLPs both the highest-skew and the most pruning-sensitive layers
# of the fixture.
MLP_L1 = 3e-4


def gelu(x):
    return 0.5 * x * (1.0 + torch.tanh(GELU_C0 * (x + GELU_C1 * x * x * x)))


class Block(nn.Module):
    def __init__(self):
        super().__init__()
        self.ln1 = nn.LayerNorm(D_MODEL, eps=LN_EPS)
        self.ln2 = nn.LayerNorm(D_MODEL, eps=LN_EPS)
        self.q = nn.Linear(D_MODEL, D_MODEL, bias=False)
        self.k = nn.Linear(D_MODEL, D_MODEL, bias=False)
        self.v = nn.Linear(D_MODEL, D_MODEL, bias=False)
        self.o = nn.Linear(D_MODEL, D_MODEL, bias=False)
        self.mlp_in = nn.Linear(D_MODEL, D_MLP, bias=False)
        self.mlp_out = nn.Linear(D_MLP, D_MODEL, bias=False)

    def forward(self, x):
        b, t, _ = x.shape
        h = self.ln1(x)
        d_head = D_MODEL // N_HEADS

        def split(m):
            return m.view(b, t, N_HEADS, d_head).transpose(1, 2)

        q, k, v = split(self.q(h)), split(self.k(h)), split(self.v(h))
        scores = q @ k.transpose(-2, -1) / (d_head ** 0.5)
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool), diagonal=1)
        scores = scores.masked_fill(mask, float("-inf"))
        ctx = (F.softmax(scores, dim=-1) @ v).transpose(1, 2).reshape(b, t, D_MODEL)
        x = x + self.o(ctx)
        h = self.ln2(x)
        x = x + self.mlp_out(gelu(self.mlp_in(h)))
        return x


class TinyLm(nn.Module):
    def __init__(self):
        super().__init__()
        self.embedding = nn.Embedding(VOCAB, D_MODEL)
        self.blocks = nn.ModuleList(Block() for _ in range(N_BLOCKS))
        self.final_ln = nn.LayerNorm(D_MODEL, eps=LN_EPS)
        self.head = nn.Linear(D_MODEL, VOCAB, bias=False)

    def forward(self, tokens):
        x = self.embedding(tokens)
        for block in self.blocks:
            x = block(x)
        return self.head(self.final_ln(x))


def markov_chains(rng):
    """Two sparse 64-state regimes: 4 successors per state, skewed
    probabilities, different transition structure. Each training window is
    generated by a single regime, so good predictions require inferring the
    active regime from the window's earlier tokens -- an order-free pooling
    job that makes the attention stack load-bearing."""
    return [np.stack([rng.permutation(VOCAB)[:4] for _ in range(VOCAB)]) for _ in range(2)]


def markov_corpus(chains, rng, length):
    probs = np.array([0.55, 0.25, 0.15, 0.05])
    out = np.empty(length, dtype=np.uint32)
    assert length % MAX_SEQ == 0
    for w in range(length // MAX_SEQ):
        succ = chains[w % 2]
        state = int(rng.integers(VOCAB))
        for i in range(MAX_SEQ):
            out[w * MAX_SEQ + i] = state
            state = int(succ[state][rng.choice(4, p=probs)])
    return out


def write_corpus(path, tokens):
    path.write_bytes(tokens.astype("<u4").tobytes())


def tensor_entries(model):
    """(name, kind, array) in the bundle's canonical order."""
    entries = [("embedding", "embedding", model.embedding.weight)]
    for i, blk in enumerate(model.blocks):
        p = f"block{i}"
        entries += [
            (f"{p}.ln1.scale", "norm_scale", blk.ln1.weight),
            (f"{p}.ln1.bias", "norm_bias", blk.ln1.bias),
            (f"{p}.attn_q", "attention_q", blk.q.weight),
            (f"{p}.attn_k", "attention_k", blk.k.weight),
            (f"{p}.attn_v", "attention_v", blk.v.weight),
            (f"{p}.attn_o", "attention_o", blk.o.weight),
            (f"{p}.ln2.scale", "norm_scale", blk.ln2.weight),
            (f"{p}.ln2.bias", "norm_bias", blk.ln2.bias),
            (f"{p}.mlp_in", "mlp_in", blk.mlp_in.weight),
            (f"{p}.mlp_out", "mlp_out", blk.mlp_out.weight),
        ]
    entries += [
        ("final_norm.scale", "norm_scale", model.final_ln.weight),
        ("final_norm.bias", "norm_bias", model.final_ln.bias),
        ("head", "head", model.head.weight),
    ]
    return entries


def save_bundle(model, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    table = []
    blob = bytearray()
    for name, kind, param in tensor_entries(model):
        data = param.detach().numpy().astype("<f4")
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


def main():
    fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(SEED)
    torch.manual_seed(SEED)

    chains = markov_chains(rng)
    train = markov_corpus(chains, rng, 1 << 17)
    calib = markov_corpus(chains, rng, 1 << 14)
    evalc = markov_corpus(chains, rng, 1 << 14)
    write_corpus(fixtures / "corpus_calib.bin", calib)
    write_corpus(fixtures / "corpus_eval.bin", evalc)

    model = TinyLm()
    for p in model.parameters():
        if p.dim() == 2:
            nn.init.normal_(p, std=0.08)
    opt = torch.optim.Adam(model.parameters(), lr=LR)

    data = torch.from_numpy(train.astype(np.int64))
    n_windows = len(data) // MAX_SEQ
    for step in range(STEPS):
        idx = torch.randint(0, n_windows, (BATCH,))
        batch = torch.stack([data[i * MAX_SEQ:(i + 1) * MAX_SEQ] for i in idx])
        logits = model(batch)
        loss = F.cross_entropy(
            logits[:, :-1].reshape(-1, VOCAB), batch[:, 1:].reshape(-1))
        if MLP_L1 > 0:
            for blk in model.blocks:
                loss = loss + MLP_L1 * (blk.mlp_in.weight.abs().sum() +
                                        blk.mlp_out.weight.abs().sum())
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % 300 == 0 or step == STEPS - 1:
            print(f"step {step:5d} loss {loss.item():.4f} ppl {float(torch.exp(loss)):.3f}")

    # Held-out perplexity with the same windowing as the library.
    model.eval()
    with torch.no_grad():
        ev = torch.from_numpy(evalc.astype(np.int64))
        total, count = 0.0, 0
        for w in range(min(32, len(ev) // MAX_SEQ)):
            win = ev[w * MAX_SEQ:(w + 1) * MAX_SEQ].unsqueeze(0)
            logits = model(win)
            nll = F.cross_entropy(
                logits[0, :-1], win[0, 1:], reduction="sum")
            total += float(nll)
            count += MAX_SEQ - 1
        print(f"eval ppl (torch, 32 windows): {np.exp(total / count):.3f}")

    save_bundle(model, fixtures / "tinylm")
    print("wrote", fixtures / "tinylm")


if __name__ == "__main__":
    sys.exit(main())
