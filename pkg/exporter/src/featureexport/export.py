"""Context-independent utterance vectors and the features.bin container.

Per utterance: run the fine-tuned encoder, take the sequence-start
position's activation from each of the final four hidden layers (fewer for
shallow test encoders) and average them into one vector.  Rows are written
per dialogue in utterance order.

File layout (little-endian): magic "PFGF", u32 version=1, u32 dim,
u32 dialogue_count, then per dialogue u16 id-length, id bytes, u32 row
count, rows*dim float32.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .finetune import encode_batch
from .models import base_encoder

MAGIC = b"PFGF"
VERSION = 1
CLS_LAYERS = 4


def write_features(path, per_dialogue, dim):
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, dim, len(per_dialogue)))
        for did, matrix in per_dialogue:
            raw = did.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", matrix.shape[0]))
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def utterance_vectors(model, tokenizer, texts, *, max_length=128, batch_size=32):
    """(len(texts), hidden) matrix of averaged sequence-start activations."""
    encoder = base_encoder(model)
    encoder.eval()
    ids, masks = encode_batch(tokenizer, texts, max_length)
    chunks = []
    used_layers = None
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            sl = slice(start, start + batch_size)
            out = encoder(input_ids=ids[sl], attention_mask=masks[sl],
                          output_hidden_states=True)
            layers = out.hidden_states[-CLS_LAYERS:]
            used_layers = len(layers)
            cls = torch.stack([h[:, 0, :] for h in layers]).mean(dim=0)
            chunks.append(cls.numpy())
    return np.concatenate(chunks, axis=0), used_layers


def export(dialogues, model, tokenizer, out_path, *, max_length=128,
           batch_size=32):
    """Write features.bin; returns (dim, layer count averaged)."""
    per_dialogue = []
    dim = None
    used = None
    for d in dialogues:
        matrix, used = utterance_vectors(
            model, tokenizer, [t.text for t in d.turns],
            max_length=max_length, batch_size=batch_size,
        )
        dim = matrix.shape[1]
        per_dialogue.append((d.id, matrix))
    write_features(out_path, per_dialogue, dim)
    return dim, used


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_path, *, model_id, corpus_path, dim, layers_used,
                   epochs, lr, seed, label_count):
    manifest = {
        "model_id": model_id,
        "finetune": {"epochs": epochs, "learning_rate": lr, "seed": seed},
        "corpus": {"path": str(corpus_path), "sha256": sha256_file(corpus_path)},
        "feature_dim": dim,
        "cls_layers_averaged": layers_used,
        "label_count": label_count,
        "features_sha256": sha256_file(out_path),
    }
    manifest_path = Path(str(out_path) + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n",
                             encoding="utf-8")
    return manifest_path
