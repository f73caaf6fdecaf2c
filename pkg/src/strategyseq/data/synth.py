"""Synthetic dialogue corpora for smoke tests and learnability checks."""

from __future__ import annotations

import numpy as np

from .corpus import Dialogue, LabelVocabulary, Role, Utterance


def synthetic_vocabularies(n_er=11, n_ee=13):
    er = LabelVocabulary(Role.ER, tuple(f"er-act-{i:02d}" for i in range(n_er)))
    ee = LabelVocabulary(Role.EE, tuple(f"ee-act-{i:02d}" for i in range(n_ee)))
    return er, ee


def synthetic_corpus(n_dialogues, seed, turns_range=(6, 16), n_er=11, n_ee=13,
                     success_rate=0.5):
    """Random dialogues with both roles present and uniform random labels.

    Returns (dialogues, er_vocab, ee_vocab).  The success flag is drawn
    independently per dialogue with probability ``success_rate``.
    """
    rng = np.random.default_rng(seed)
    er_vocab, ee_vocab = synthetic_vocabularies(n_er, n_ee)
    lo, hi = turns_range
    dialogues = []
    for d in range(n_dialogues):
        t = int(rng.integers(lo, hi + 1))
        roles = [Role.ER if rng.random() < 0.5 else Role.EE for _ in range(t)]
        # guarantee both roles appear
        roles[0] = Role.ER
        if t > 1:
            roles[1] = Role.EE
        utts = []
        for i, role in enumerate(roles):
            vocab = er_vocab if role is Role.ER else ee_vocab
            label_id = int(rng.integers(0, len(vocab)))
            utts.append(
                Utterance(
                    index=i,
                    role=role,
                    text=f"synthetic utterance {d}-{i}",
                    label=vocab.name_of(label_id),
                    label_id=label_id,
                )
            )
        success = bool(rng.random() < success_rate)
        dialogues.append(Dialogue(id=f"synth-{d:04d}", utterances=utts, success=success))
    return dialogues, er_vocab, ee_vocab
