"""Versioned binary container for trained model parameters.

Layout (little-endian throughout)::

    magic    4 bytes  b"PFGM"
    version  u32      1
    cfg_len  u32      length of the UTF-8 JSON model-config blob
    cfg      cfg_len bytes
    count    u32      number of tensor records
    per record:
        name_len u16, name bytes (UTF-8)
        rank     u32, rank * u32 dims
        payload  prod(dims) float32

The config blob holds everything :meth:`StrategyModel.config_dict` needs
to rebuild an identically shaped model before the weights are loaded.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import StrategyModel

MAGIC = b"PFGM"
VERSION = 1


class SnapshotError(ValueError):
    pass


def save_snapshot(path, model, extra=None):
    config = model.config_dict()
    if extra:
        config = {**config, "extra": extra}
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    params = list(model.named_parameters())
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(params)))
        for name, p in params:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            shape = p.data.shape
            fh.write(struct.pack("<I", len(shape)))
            for dim in shape:
                fh.write(struct.pack("<I", dim))
            fh.write(p.data.astype("<f4").tobytes())


def read_snapshot(path):
    """Raw read: returns (config dict, {name: float32 array})."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise SnapshotError(f"{path}: bad magic bytes {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise SnapshotError(f"{path}: unsupported snapshot version {version}")
        (cfg_len,) = struct.unpack("<I", fh.read(4))
        config = json.loads(fh.read(cfg_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            size = int(np.prod(dims)) if rank else 1
            payload = fh.read(size * 4)
            if len(payload) != size * 4:
                raise SnapshotError(f"{path}: truncated payload for {name!r}")
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return config, tensors


def load_snapshot(path):
    """Rebuild the model a snapshot was saved from."""
    config, tensors = read_snapshot(path)
    config = {k: v for k, v in config.items() if k != "extra"}
    model = StrategyModel.from_config(config)
    named = dict(model.named_parameters())
    missing = set(named) - set(tensors)
    surplus = set(tensors) - set(named)
    if missing or surplus:
        raise SnapshotError(
            f"snapshot/model parameter mismatch: missing={sorted(missing)} "
            f"surplus={sorted(surplus)}"
        )
    for name, arr in tensors.items():
        p = named[name]
        if p.data.shape != arr.shape:
            raise SnapshotError(
                f"parameter {name!r} has shape {arr.shape} in file, "
                f"expected {p.data.shape}"
            )
        p.data = arr.astype(p.data.dtype)
    return model
