"""Dialogue corpus model: utterances, roles, label vocabularies, JSONL I/O.

Canonical on-disk form is JSONL, one dialogue per line::

    {"id": str, "success": bool, "turns": [{"role": "ER"|"EE", "text": str, "label": str}, ...]}

When ``success`` is absent it is derived from the turns: a dialogue counts
as successful iff any persuadee utterance carries the ``agree-donation`` or
``provide-donation-amount`` label.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources as importlib_resources
from pathlib import Path


class CorpusError(ValueError):
    pass


class Role(str, Enum):
    ER = "ER"  # persuader
    EE = "EE"  # persuadee

    @property
    def index(self):
        return 0 if self is Role.ER else 1


SUCCESS_LABELS = ("agree-donation", "provide-donation-amount")


@dataclass(frozen=True)
class Utterance:
    index: int
    role: Role
    text: str
    label: str
    label_id: int = -1


@dataclass
class Dialogue:
    id: str
    utterances: list[Utterance]
    success: bool

    def __len__(self):
        return len(self.utterances)

    @property
    def roles(self):
        return [u.role for u in self.utterances]


@dataclass(frozen=True)
class LabelVocabulary:
    role: Role
    names: tuple[str, ...]
    _index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise CorpusError(f"duplicate labels in {self.role.value} vocabulary")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def id_of(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise CorpusError(f"label {name!r} not in {self.role.value} vocabulary") from None

    def name_of(self, label_id):
        return self.names[label_id]

    def __contains__(self, name):
        return name in self._index

    def to_file(self, path):
        lines = [f"# role: {self.role.value}"] + list(self.names)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path):
        role = None
        names = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "role:" in line:
                    role = Role(line.split("role:", 1)[1].strip())
                continue
            names.append(line)
        if role is None:
            raise CorpusError(f"vocabulary file {path} has no '# role:' header")
        return cls(role=role, names=tuple(names))


def default_vocabulary(role):
    """The shipped default taxonomy: 11 persuader and 13 persuadee labels."""
    name = "er_labels.txt" if Role(role) is Role.ER else "ee_labels.txt"
    ref = importlib_resources.files("strategyseq.resources").joinpath(name)
    with importlib_resources.as_file(ref) as path:
        return LabelVocabulary.from_file(path)


def derive_success(turns):
    return any(t["role"] == Role.EE.value and t["label"] in SUCCESS_LABELS for t in turns)


def _build_vocabulary(role, dialogues):
    seen = sorted({u.label for d in dialogues for u in d.utterances if u.role is role})
    return LabelVocabulary(role=role, names=tuple(seen))


def _resolve_ids(dialogues, er_vocab, ee_vocab):
    resolved = []
    for d in dialogues:
        utts = []
        for u in d.utterances:
            vocab = er_vocab if u.role is Role.ER else ee_vocab
            if u.label not in vocab:
                raise CorpusError(
                    f"dialogue {d.id!r}: label {u.label!r} not in the supplied "
                    f"{u.role.value} vocabulary"
                )
            utts.append(replace(u, label_id=vocab.id_of(u.label)))
        resolved.append(Dialogue(id=d.id, utterances=utts, success=d.success))
    return resolved


def load_corpus(path, er_vocab=None, ee_vocab=None):
    """Parse a JSONL corpus; returns (dialogues, er_vocab, ee_vocab).

    Vocabularies are built from the observed labels (sorted) unless fixed
    ones are supplied, in which case every label must already be known.
    Malformed lines are reported with their line number.
    """
    path = Path(path)
    dialogues = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            try:
                turns = obj["turns"]
                utts = []
                for i, t in enumerate(turns):
                    try:
                        role = Role(t["role"])
                    except ValueError:
                        raise CorpusError(
                            f"{path}:{lineno}: unknown role token {t['role']!r}"
                        ) from None
                    utts.append(Utterance(index=i, role=role, text=t["text"], label=t["label"]))
                success = obj["success"] if "success" in obj else derive_success(turns)
                dialogues.append(Dialogue(id=str(obj["id"]), utterances=utts, success=bool(success)))
            except KeyError as exc:
                raise CorpusError(f"{path}:{lineno}: missing field {exc}") from None
    for d in dialogues:
        if not d.utterances:
            raise CorpusError(f"dialogue {d.id!r} has no utterances")
        present = {u.role for u in d.utterances}
        if present != {Role.ER, Role.EE}:
            warnings.warn(f"dialogue {d.id!r} has utterances from only one role", stacklevel=2)
    if er_vocab is None:
        er_vocab = _build_vocabulary(Role.ER, dialogues)
    if ee_vocab is None:
        ee_vocab = _build_vocabulary(Role.EE, dialogues)
    return _resolve_ids(dialogues, er_vocab, ee_vocab), er_vocab, ee_vocab


def save_corpus(path, dialogues):
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in dialogues:
            obj = {
                "id": d.id,
                "success": d.success,
                "turns": [
                    {"role": u.role.value, "text": u.text, "label": u.label}
                    for u in d.utterances
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def sample_corpus():
    """The bundled 16-utterance example dialogue used in docs and tests."""
    ref = importlib_resources.files("strategyseq.resources").joinpath("sample_dialogue.jsonl")
    with importlib_resources.as_file(ref) as path:
        return load_corpus(path)


# ---------------------------------------------------------------------------
# speaker split / merge


def split_by_speaker(dialogue):
    """Order-preserving partition into (ER utterances, EE utterances).

    Original positions stay on each utterance's ``index`` field so
    :func:`merge_by_position` can restore the interleaving.
    """
    er = [u for u in dialogue.utterances if u.role is Role.ER]
    ee = [u for u in dialogue.utterances if u.role is Role.EE]
    return er, ee


def merge_by_position(er_seq, ee_seq):
    """Inverse of :func:`split_by_speaker` on the utterance lists."""
    combined = list(er_seq) + list(ee_seq)
    indices = [u.index for u in combined]
    expected = set(range(len(combined)))
    if len(set(indices)) != len(indices):
        raise CorpusError("overlapping utterance indices in merge")
    if set(indices) != expected:
        raise CorpusError("utterance indices do not cover the sequence")
    out = [None] * len(combined)
    for u in combined:
        out[u.index] = u
    return out


# ---------------------------------------------------------------------------
# BI-scheme rewriting


def bi_vocabulary(vocab):
    doubled = []
    for name in vocab.names:
        doubled.append(f"B-{name}")
        doubled.append(f"I-{name}")
    return LabelVocabulary(role=vocab.role, names=tuple(doubled))


def bi_transform(dialogue, er_vocab, ee_vocab):
    """Rewrite labels to B-/I- run encoding.

    An utterance continues a run (prefix ``I-``) iff the immediately
    preceding utterance in the dialogue has the same (role, label) pair;
    everything else, including the first utterance, starts one (``B-``).
    Returns (dialogue, er_bi_vocab, ee_bi_vocab).
    """
    er_bi, ee_bi = bi_vocabulary(er_vocab), bi_vocabulary(ee_vocab)
    utts = []
    prev = None
    for u in dialogue.utterances:
        cont = prev is not None and prev.role is u.role and prev.label == u.label
        name = f"{'I' if cont else 'B'}-{u.label}"
        vocab = er_bi if u.role is Role.ER else ee_bi
        utts.append(replace(u, label=name, label_id=vocab.id_of(name)))
        prev = u
    return Dialogue(id=dialogue.id, utterances=utts, success=dialogue.success), er_bi, ee_bi


def strip_bi(dialogue, er_vocab, ee_vocab):
    """Remove B-/I- prefixes, restoring labels and ids in the base vocabularies."""
    utts = []
    for u in dialogue.utterances:
        if not (u.label.startswith("B-") or u.label.startswith("I-")):
            raise CorpusError(f"label {u.label!r} carries no B-/I- prefix")
        name = u.label[2:]
        vocab = er_vocab if u.role is Role.ER else ee_vocab
        utts.append(replace(u, label=name, label_id=vocab.id_of(name)))
    return Dialogue(id=dialogue.id, utterances=utts, success=dialogue.success)
