"""Versioned binary checkpoints.

Layout: magic, version, config digest, JSON config block, JSON vocab block,
named parameter blocks (shape-prefixed little-endian float32), optional
optimizer state, end marker. Serialization is deterministic, so identical
states produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..corpus.vocab import Vocab
from ..model.config import ModelConfig
from ..model.state import ModelState
from ..nn.optim import AdamState
from .config import TrainConfig

MAGIC = b"KGDLGCK1"
END = b"KGDLGEND"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write_block(fh, payload: bytes):
    fh.write(struct.pack("<Q", len(payload)))
    fh.write(payload)


def _read_exact(fh, n: int, section: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"corrupt checkpoint: truncated in section {section!r}")
    return data


def _read_block(fh, section: str) -> bytes:
    (n,) = struct.unpack("<Q", _read_exact(fh, 8, section))
    return _read_exact(fh, n, section)


def _write_array(fh, arr: np.ndarray):
    arr = np.asarray(arr).astype("<f4", copy=False)  # tobytes() emits C order
    fh.write(struct.pack("<I", arr.ndim))
    for dim in arr.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(arr.tobytes())


def _read_array(fh, section: str) -> np.ndarray:
    (ndim,) = struct.unpack("<I", _read_exact(fh, 4, section))
    shape = tuple(struct.unpack("<I", _read_exact(fh, 4, section))[0] for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    raw = _read_exact(fh, count * 4, section)
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)


def save_checkpoint(state: ModelState, train_cfg: TrainConfig, vocab: Vocab,
                    path: str | Path, optimizer: AdamState | None = None) -> None:
    config = {
        "model": state.config.to_json(),
        "train": train_cfg.to_json(),
        "vocab_size": state.vocab_size,
    }
    config_bytes = _canonical_json(config)
    named = state.named_parameters()
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(hashlib.sha256(config_bytes).digest())
        _write_block(fh, config_bytes)
        _write_block(fh, _canonical_json(vocab.to_json()))
        fh.write(struct.pack("<I", len(named)))
        for name, tensor in named:
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            _write_array(fh, tensor.data)
        if optimizer is None:
            fh.write(struct.pack("<B", 0))
        else:
            fh.write(struct.pack("<B", 1))
            fh.write(struct.pack("<Q", optimizer.step))
            for name, _ in named:
                _write_array(fh, optimizer.m[name])
                _write_array(fh, optimizer.v[name])
        fh.write(END)


def load_checkpoint(path: str | Path):
    """Returns (state, train_cfg, vocab, optimizer-or-None); bit-exact round trip."""
    with Path(path).open("rb") as fh:
        if _read_exact(fh, 8, "header") != MAGIC:
            raise CheckpointError("corrupt checkpoint: bad magic in section 'header'")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "header"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        digest = _read_exact(fh, 32, "header")
        config_bytes = _read_block(fh, "config")
        if hashlib.sha256(config_bytes).digest() != digest:
            raise CheckpointError("corrupt checkpoint: config digest mismatch in section 'config'")
        config = json.loads(config_bytes)
        vocab = Vocab.from_json(json.loads(_read_block(fh, "vocab")))
        model_cfg = ModelConfig.from_json(config["model"])
        train_cfg = TrainConfig.from_json(config["train"])
        state = ModelState.create(model_cfg, config["vocab_size"], seed=0)
        named = state.named_parameters()
        (n_params,) = struct.unpack("<I", _read_exact(fh, 4, "params"))
        if n_params != len(named):
            raise CheckpointError("corrupt checkpoint: parameter count mismatch in section 'params'")
        for name, tensor in named:
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, f"param {name}"))
            stored = _read_exact(fh, name_len, f"param {name}").decode("utf-8")
            if stored != name:
                raise CheckpointError(f"corrupt checkpoint: expected param {name!r}, found {stored!r}")
            arr = _read_array(fh, f"param {name}")
            if arr.shape != tensor.data.shape:
                raise CheckpointError(f"corrupt checkpoint: shape mismatch for param {name!r}")
            tensor.data = arr
        (has_opt,) = struct.unpack("<B", _read_exact(fh, 1, "optimizer"))
        optimizer = None
        if has_opt:
            optimizer = AdamState.create(named, lr=train_cfg.lr)
            (optimizer.step,) = struct.unpack("<Q", _read_exact(fh, 8, "optimizer"))
            for name, _ in named:
                optimizer.m[name] = _read_array(fh, f"optimizer {name}")
                optimizer.v[name] = _read_array(fh, f"optimizer {name}")
        if _read_exact(fh, 8, "trailer") != END:
            raise CheckpointError("corrupt checkpoint: bad end marker in section 'trailer'")
    return state, train_cfg, vocab, optimizer
