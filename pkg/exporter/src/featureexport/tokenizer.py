"""Word-level tokenizer backing the offline test encoder.

Real exports use the pretrained model's own tokenizer; this one exists so
the whole pipeline (fine-tune, checkpoint, export) runs without network
access.  Ids follow the encoder's conventions: 0 = sequence-start token
(the classification position), 1 = padding, 2 = unknown.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

BOS, PAD, UNK = 0, 1, 2
_SPECIALS = 3
_WORD = re.compile(r"[\w'-]+|[^\w\s]")


def _words(text):
    return _WORD.findall(text.lower())


class WordTokenizer:
    def __init__(self, vocab):
        self.vocab = dict(vocab)

    @classmethod
    def build(cls, texts):
        seen = sorted({w for t in texts for w in _words(t)})
        return cls({w: i + _SPECIALS for i, w in enumerate(seen)})

    @property
    def vocab_size(self):
        return len(self.vocab) + _SPECIALS

    def encode(self, text, max_length):
        ids = [BOS] + [self.vocab.get(w, UNK) for w in _words(text)]
        ids = ids[:max_length]
        mask = [1] * len(ids)
        while len(ids) < max_length:
            ids.append(PAD)
            mask.append(0)
        return ids, mask

    def save(self, path):
        Path(path).write_text(json.dumps(self.vocab, sort_keys=True),
                              encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))
