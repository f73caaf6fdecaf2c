"""Utterance-level strategy classification fine-tuning.

Both roles' utterances train one classifier over a role-tagged label
space; the classifier head is scaffolding — the product is the fine-tuned
encoder whose activations the export step reads.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from torch.utils.data import DataLoader, TensorDataset

from .corpus import role_tagged_labels
from .models import OFFLINE_MODEL_ID, build_model
from .tokenizer import WordTokenizer


def utterance_examples(dialogues, label_map):
    texts, labels = [], []
    for d in dialogues:
        for t in d.turns:
            texts.append(t.text)
            labels.append(label_map[f"{t.role}:{t.label}"])
    return texts, labels


def encode_batch(tokenizer, texts, max_length):
    ids, masks = [], []
    for text in texts:
        i, m = tokenizer.encode(text, max_length)
        ids.append(i)
        masks.append(m)
    return torch.tensor(ids, dtype=torch.long), torch.tensor(masks, dtype=torch.long)


def finetune(dialogues, model_id, *, epochs=3, lr=2e-5, batch_size=16,
             max_length=128, seed=0, verbose=False):
    """Train the classifier; returns (model, tokenizer, label_map, history)."""
    label_map = role_tagged_labels(dialogues)
    texts, labels = utterance_examples(dialogues, label_map)
    model, tokenizer = build_model(
        model_id, num_labels=len(label_map), seed=seed, max_length=max_length,
        corpus_texts=texts,
    )
    ids, masks = encode_batch(tokenizer, texts, max_length)
    targets = torch.tensor(labels, dtype=torch.long)
    torch.manual_seed(seed)
    loader = DataLoader(TensorDataset(ids, masks, targets),
                        batch_size=batch_size, shuffle=True,
                        generator=torch.Generator().manual_seed(seed))
    opt = torch.optim.AdamW(model.parameters(), lr=lr)
    model.train()
    history = []
    for epoch in range(epochs):
        total, seen = 0.0, 0
        for batch_ids, batch_masks, batch_y in loader:
            opt.zero_grad()
            out = model(input_ids=batch_ids, attention_mask=batch_masks,
                        labels=batch_y)
            out.loss.backward()
            opt.step()
            total += out.loss.item() * len(batch_y)
            seen += len(batch_y)
        history.append(total / seen)
        if verbose:
            print(f"epoch {epoch + 1}/{epochs}  loss {history[-1]:.4f}", flush=True)
    model.eval()
    return model, tokenizer, label_map, history


def training_accuracy(model, tokenizer, dialogues, label_map, max_length=128,
                      batch_size=32):
    texts, labels = utterance_examples(dialogues, label_map)
    ids, masks = encode_batch(tokenizer, texts, max_length)
    targets = torch.tensor(labels)
    hits = 0
    model.eval()
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            sl = slice(start, start + batch_size)
            logits = model(input_ids=ids[sl], attention_mask=masks[sl]).logits
            hits += int((logits.argmax(dim=1) == targets[sl]).sum())
    return hits / len(texts)


def save_checkpoint(path, model, tokenizer, label_map, model_id):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(path)
    meta = {"model_id": model_id, "label_map": label_map}
    (path / "export_meta.json").write_text(json.dumps(meta, indent=2),
                                           encoding="utf-8")
    if isinstance(tokenizer, WordTokenizer):
        tokenizer.save(path / "word_vocab.json")
    else:
        tokenizer.inner.save_pretrained(path)


def load_checkpoint(path):
    from transformers import AutoModelForSequenceClassification

    path = Path(path)
    meta = json.loads((path / "export_meta.json").read_text(encoding="utf-8"))
    model = AutoModelForSequenceClassification.from_pretrained(path)
    model.eval()
    word_vocab = path / "word_vocab.json"
    if word_vocab.exists():
        tokenizer = WordTokenizer.load(word_vocab)
    else:
        from transformers import AutoTokenizer

        from .models import HubTokenizer

        tokenizer = HubTokenizer(AutoTokenizer.from_pretrained(path))
    return model, tokenizer, meta
