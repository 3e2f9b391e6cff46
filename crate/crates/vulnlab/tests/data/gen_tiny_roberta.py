"""Regenerate the tiny RoBERTa checkpoint and reference activations.

Writes `tiny-roberta/` (config.json, model.safetensors, vocab.json,
merges.txt) and `tiny-roberta-expected.json` next to this script. The Rust
encoder is checked against these activations, which come from the
`transformers` reference implementation.

    python3 gen_tiny_roberta.py
"""

import json
import os

import torch
from transformers import RobertaConfig, RobertaModel, RobertaTokenizer

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "tiny-roberta")


def bytes_to_unicode():
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


MERGES = [
    ("d", "e"), ("de", "f"), ("Ġ", "x"), ("Ġ", "="), ("r", "e"), ("t", "u"),
    ("re", "tu"), ("retu", "r"), ("retur", "n"), ("Ġ", "return"), ("o", "s"),
    ("s", "y"), ("sy", "s"), ("Ġ", "+"), ("Ġ", "1"), ("i", "m"), ("im", "p"),
    ("imp", "o"), ("impo", "r"), ("impor", "t"), ("ĠĠ", "ĠĠ"), ("Ġ", "Ġ"),
    ("c", "m"), ("cm", "d"), ("e", "x"), ("ex", "e"), ("exe", "c"),
]


def build_vocab():
    vocab = {"<s>": 0, "<pad>": 1, "</s>": 2, "<unk>": 3}
    for ch in bytes_to_unicode().values():
        vocab.setdefault(ch, len(vocab))
    for a, b in MERGES:
        vocab.setdefault(a + b, len(vocab))
    vocab.setdefault("<mask>", len(vocab))
    return vocab


SAMPLES = [
    "def f(x):\n    return x + 1\n",
    "import os\nos.system(cmd)",
    "",
    "exec(cmd) " * 12,
    "s = 'héllo' # ✓\n\tx=1",
]


def main():
    os.makedirs(OUT, exist_ok=True)
    vocab = build_vocab()
    with open(os.path.join(OUT, "vocab.json"), "w", encoding="utf-8") as f:
        json.dump(vocab, f, ensure_ascii=False)
    with open(os.path.join(OUT, "merges.txt"), "w", encoding="utf-8") as f:
        f.write("#version: 0.2\n")
        for a, b in MERGES:
            f.write(f"{a} {b}\n")

    config = RobertaConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=32,
        max_position_embeddings=34,
        type_vocab_size=1,
        pad_token_id=1,
        bos_token_id=0,
        eos_token_id=2,
        layer_norm_eps=1e-5,
        hidden_act="gelu",
        initializer_range=0.4,
    )
    torch.manual_seed(7)
    model = RobertaModel(config, add_pooling_layer=False)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if "LayerNorm" in name:
                p.add_(0.1 * torch.randn_like(p))
            elif name.endswith("bias"):
                p.copy_(0.1 * torch.randn_like(p))
    model.eval()
    model.save_pretrained(OUT, safe_serialization=True)

    tok = RobertaTokenizer(
        os.path.join(OUT, "vocab.json"), os.path.join(OUT, "merges.txt")
    )
    cases = []
    for text in SAMPLES:
        enc = tok(text, truncation=True, max_length=32, return_tensors="pt")
        with torch.no_grad():
            hidden = model(**enc).last_hidden_state[0]
        ids = enc["input_ids"][0].tolist()
        cases.append(
            {
                "source": text,
                "input_ids": ids,
                "hidden": hidden[1:-1].tolist(),
            }
        )
    with open(os.path.join(HERE, "tiny-roberta-expected.json"), "w") as f:
        json.dump({"hidden_dim": 16, "max_positions": 32, "cases": cases}, f)


if __name__ == "__main__":
    main()
