"""Minimal reader for the dialogues.jsonl interchange format.

Deliberately self-contained: the exporter talks to the training side only
through the file formats, so the schema is re-implemented here rather than
imported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Turn:
    role: str   # "ER" | "EE"
    text: str
    label: str


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple


def load_dialogues(path):
    dialogues = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            turns = tuple(
                Turn(role=t["role"], text=t["text"], label=t["label"])
                for t in obj["turns"]
            )
            if any(t.role not in ("ER", "EE") for t in turns):
                raise ValueError(f"{path}:{lineno}: unknown role token")
            dialogues.append(Dialogue(id=str(obj["id"]), turns=turns))
    return dialogues


def role_tagged_labels(dialogues):
    """One classification space over both roles: 'ER:label' / 'EE:label'."""
    names = sorted({f"{t.role}:{t.label}" for d in dialogues for t in d.turns})
    return {name: i for i, name in enumerate(names)}
