"""Parameter checkpoints: a text manifest next to a raw float32 payload.

``model.ckpt`` holds every parameter as little-endian float32, concatenated
in manifest order. ``model.ckpt.manifest`` looks like::

    format = hsisr-checkpoint 1
    config scale = 4
    param entry1.weight 64,1,3,3
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint", "MANIFEST_SUFFIX"]

MANIFEST_SUFFIX = ".manifest"
_MAGIC = "format = hsisr-checkpoint 1"


def save_checkpoint(path, params, config=None):
    """Write ``params`` (name -> array) and a flat ``config`` mapping."""
    path = Path(os.fspath(path))
    lines = [_MAGIC]
    for key, value in (config or {}).items():
        if any(ch.isspace() for ch in str(key)) or "\n" in str(value):
            raise ValueError(f"config entry {key!r} cannot be stored")
        lines.append(f"config {key} = {value}")
    chunks = []
    for name, arr in params.items():
        arr = np.asarray(arr)
        if any(ch.isspace() for ch in name):
            raise ValueError(f"parameter name {name!r} contains whitespace")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {name} has non-finite values")
        lines.append(f"param {name} {','.join(str(d) for d in arr.shape)}")
        chunks.append(arr.astype("<f4").tobytes(order="C"))
    path.write_bytes(b"".join(chunks))
    Path(str(path) + MANIFEST_SUFFIX).write_text("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Return ``(params, config)``; config values are left as strings."""
    path = Path(os.fspath(path))
    manifest = Path(str(path) + MANIFEST_SUFFIX)
    text = manifest.read_text().splitlines()
    if not text or text[0].strip() != _MAGIC:
        raise ValueError(f"{manifest} is not a checkpoint manifest")
    config, shapes = {}, []
    for line in text[1:]:
        line = line.strip()
        if not line:
            continue
        kind, _, rest = line.partition(" ")
        if kind == "config":
            key, sep, value = rest.partition("=")
            if not sep:
                raise ValueError(f"garbled config line in {manifest}: {line!r}")
            config[key.strip()] = value.strip()
        elif kind == "param":
            name, _, dims = rest.partition(" ")
            shape = tuple(int(d) for d in dims.split(",")) if dims.strip() else ()
            shapes.append((name, shape))
        else:
            raise ValueError(f"garbled line in {manifest}: {line!r}")
    raw = path.read_bytes()
    total = sum(int(np.prod(s)) for _, s in shapes)
    if len(raw) != 4 * total:
        raise ValueError(f"checkpoint payload size mismatch: {len(raw)} bytes, manifest implies {4 * total}")
    flat = np.frombuffer(raw, dtype="<f4")
    params, offset = {}, 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        params[name] = flat[offset : offset + size].astype(np.float32).reshape(shape)
        offset += size
    return params, config
