"""Adjacent-label transition statistics, per speaker-role pair.

For every adjacent utterance pair the counter increments one cell of the
matrix selected by (previous role, next role); all four matrices are then
divided by the number of dialogues, giving average transitions per
dialogue — the quantity plotted as heatmaps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Role

ROLE_PAIRS = (
    (Role.ER, Role.ER),
    (Role.ER, Role.EE),
    (Role.EE, Role.ER),
    (Role.EE, Role.EE),
)


@dataclass
class TransitionStats:
    tables: dict
    dialogue_count: int
    er_vocab: object
    ee_vocab: object

    def table(self, prev_role, next_role):
        return self.tables[(Role(prev_role), Role(next_role))]

    def _vocab(self, role):
        return self.er_vocab if role is Role.ER else self.ee_vocab

    def cell(self, prev_role, prev_label, next_role, next_label):
        prev_role, next_role = Role(prev_role), Role(next_role)
        i = self._vocab(prev_role).id_of(prev_label)
        j = self._vocab(next_role).id_of(next_label)
        return float(self.tables[(prev_role, next_role)][i, j])

    def to_csv(self, prev_role, next_role, path):
        """One CSV per role pair; headers follow vocabulary order exactly."""
        prev_role, next_role = Role(prev_role), Role(next_role)
        rows_vocab = self._vocab(prev_role)
        cols_vocab = self._vocab(next_role)
        table = self.tables[(prev_role, next_role)]
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + list(cols_vocab.names))
            for i, name in enumerate(rows_vocab.names):
                writer.writerow([name] + [repr(float(v)) for v in table[i]])


def transition_stats(corpus, er_vocab, ee_vocab):
    if not corpus:
        raise ValueError("transition statistics need a nonempty corpus")
    sizes = {Role.ER: len(er_vocab), Role.EE: len(ee_vocab)}
    tables = {
        (r, s): np.zeros((sizes[r], sizes[s]), dtype=np.float64) for r, s in ROLE_PAIRS
    }
    for d in corpus:
        for prev, cur in zip(d.utterances, d.utterances[1:]):
            tables[(prev.role, cur.role)][prev.label_id, cur.label_id] += 1.0
    n = len(corpus)
    for key in tables:
        tables[key] /= n
    return TransitionStats(
        tables=tables, dialogue_count=n, er_vocab=er_vocab, ee_vocab=ee_vocab
    )
