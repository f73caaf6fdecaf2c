"""Per-dialogue utterance feature matrices and their binary container.

File layout (all integers little-endian)::

    magic   4 bytes  b"PFGF"
    version u32      1
    dim     u32      feature width
    count   u32      number of dialogues
    per dialogue:
        id_len  u16
        id      id_len bytes, UTF-8
        rows    u32
        data    rows*dim float32

The synthetic generator plants one Gaussian class mean per (role, label)
pair so a linear probe — and anything stronger — can recover the labels.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .corpus import Role

MAGIC = b"PFGF"
VERSION = 1


class FeatureFileError(ValueError):
    pass


class FeatureStore:
    def __init__(self, dim, matrices=None):
        self.dim = int(dim)
        self._matrices = {}
        if matrices:
            for did, m in matrices.items():
                self.put(did, m)

    def put(self, dialogue_id, matrix):
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise FeatureFileError(
                f"feature matrix for {dialogue_id!r} has shape {matrix.shape}, "
                f"expected (T, {self.dim})"
            )
        self._matrices[str(dialogue_id)] = matrix

    def get(self, dialogue_id):
        return self._matrices[str(dialogue_id)]

    def __contains__(self, dialogue_id):
        return str(dialogue_id) in self._matrices

    def __len__(self):
        return len(self._matrices)

    def ids(self):
        return list(self._matrices.keys())

    def validate(self, corpus):
        """Check that every dialogue has a matrix with one row per utterance."""
        for d in corpus:
            if d.id not in self._matrices:
                raise FeatureFileError(f"no features stored for dialogue {d.id!r}")
            rows = self._matrices[d.id].shape[0]
            if rows != len(d.utterances):
                raise FeatureFileError(
                    f"dialogue {d.id!r} has {len(d.utterances)} utterances but "
                    f"{rows} feature rows"
                )

    def save(self, path):
        with Path(path).open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<III", VERSION, self.dim, len(self._matrices)))
            for did, matrix in self._matrices.items():
                raw_id = did.encode("utf-8")
                fh.write(struct.pack("<H", len(raw_id)))
                fh.write(raw_id)
                fh.write(struct.pack("<I", matrix.shape[0]))
                fh.write(matrix.astype("<f4").tobytes())

    @classmethod
    def load(cls, path, corpus=None):
        path = Path(path)
        with path.open("rb") as fh:
            magic = fh.read(4)
            if magic != MAGIC:
                raise FeatureFileError(f"{path}: bad magic bytes {magic!r}")
            version, dim, count = struct.unpack("<III", fh.read(12))
            if version != VERSION:
                raise FeatureFileError(f"{path}: unsupported version {version}")
            store = cls(dim)
            for _ in range(count):
                (id_len,) = struct.unpack("<H", fh.read(2))
                did = fh.read(id_len).decode("utf-8")
                (rows,) = struct.unpack("<I", fh.read(4))
                payload = fh.read(rows * dim * 4)
                if len(payload) != rows * dim * 4:
                    raise FeatureFileError(f"{path}: truncated payload for {did!r}")
                store.put(did, np.frombuffer(payload, dtype="<f4").reshape(rows, dim))
        if corpus is not None:
            store.validate(corpus)
        return store


def load_features(path, corpus=None):
    return FeatureStore.load(path, corpus=corpus)


def synth_features(corpus, dim, seed, sigma=0.1, success_shift=0.0):
    """Label-informative Gaussian features for a corpus.

    Each (role, label_id) pair gets a class mean drawn once from N(0, I);
    an utterance vector is its class mean plus N(0, sigma^2 I).  When
    ``success_shift`` is nonzero, every utterance of a successful dialogue
    is additionally shifted along one fixed random unit direction, planting
    a dialogue-level success signal.
    """
    if dim <= 0:
        raise ValueError("feature dimension must be positive")
    rng = np.random.default_rng(seed)
    means = {}
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    store = FeatureStore(dim)
    for d in corpus:
        rows = np.empty((len(d.utterances), dim), dtype=np.float64)
        for i, u in enumerate(d.utterances):
            key = (u.role, u.label_id)
            if key not in means:
                means[key] = rng.standard_normal(dim)
            rows[i] = means[key]
            if sigma > 0:
                rows[i] = rows[i] + sigma * rng.standard_normal(dim)
        if success_shift and d.success:
            rows += success_shift * direction
        store.put(d.id, rows)
    return store
