"""Encoder construction: pretrained hub models or the offline test model.

``OFFLINE_MODEL_ID`` names a randomly initialized 1024-dim two-layer
encoder paired with the word tokenizer; it keeps the full pipeline
runnable and deterministic with no downloads.  Anything else is treated as
a pretrained identifier and fetched through the transformers hub API.
"""

from __future__ import annotations

import torch

from .tokenizer import WordTokenizer

OFFLINE_MODEL_ID = "random-test"
OFFLINE_HIDDEN = 1024
OFFLINE_LAYERS = 2


class MissingWeightsError(RuntimeError):
    pass


class HubTokenizer:
    """Thin adapter so hub tokenizers and the word tokenizer look alike."""

    def __init__(self, inner):
        self.inner = inner

    def encode(self, text, max_length):
        out = self.inner(text, truncation=True, max_length=max_length,
                         padding="max_length")
        return out["input_ids"], out["attention_mask"]


def build_model(model_id, num_labels, seed=0, max_length=128, corpus_texts=None):
    """Returns (classifier model, tokenizer adapter).

    The classifier is a sequence-classification head over the base encoder;
    the base encoder's hidden states are what the export reads.
    """
    if model_id == OFFLINE_MODEL_ID:
        from transformers import RobertaConfig, RobertaForSequenceClassification

        if corpus_texts is None:
            raise ValueError("offline model needs the corpus texts to build a vocabulary")
        tokenizer = WordTokenizer.build(corpus_texts)
        config = RobertaConfig(
            vocab_size=tokenizer.vocab_size,
            hidden_size=OFFLINE_HIDDEN,
            num_hidden_layers=OFFLINE_LAYERS,
            num_attention_heads=16,
            intermediate_size=OFFLINE_HIDDEN,
            max_position_embeddings=max_length + 2,
            num_labels=num_labels,
        )
        torch.manual_seed(seed)
        model = RobertaForSequenceClassification(config)
        return model, tokenizer

    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForSequenceClassification.from_pretrained(
            model_id, num_labels=num_labels
        )
    except OSError as exc:
        raise MissingWeightsError(
            f"could not load pretrained weights for {model_id!r}: {exc}. "
            f"Download them first (e.g. `huggingface-cli download {model_id}`) "
            f"or pass --model {OFFLINE_MODEL_ID} for an offline run."
        ) from None
    return model, HubTokenizer(tokenizer)


def base_encoder(model):
    """The backbone under a sequence-classification head."""
    return model.base_model
