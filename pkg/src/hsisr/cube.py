"""Hyperspectral cube container, on-disk format and patch sampling.

A cube is stored as two files::

    scene.hsr        raw little-endian float32 values, band-major (L, H, W)
    scene.hsr.meta   "key = value" text header

The header records ``bands``, ``height``, ``width``, ``dtype``,
``byte_order``, ``order`` and ``max_value``. Readers divide by
``max_value`` so that in-memory cubes are reflectances in ``[0, 1]``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .resample import ResamplePlan, resample_cube
from .validation import check_cube

__all__ = [
    "HsiCube",
    "PatchSpec",
    "read_cube",
    "write_cube",
    "cube_paths",
    "extract_patches",
    "augment",
    "rotate90",
    "hflip",
]

PAYLOAD_SUFFIX = ".hsr"
META_SUFFIX = ".hsr.meta"
_FORMAT_KEYS = {"dtype": "f32", "byte_order": "little-endian", "order": "band-major"}


@dataclass(frozen=True, eq=False)
class HsiCube:
    """An ``(L, H, W)`` float32 reflectance cube with values in ``[0, 1]``."""

    data: np.ndarray

    def __post_init__(self):
        arr = check_cube(self.data, dtype=np.float32, unit_range=True)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def bands(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, HsiCube):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    __hash__ = None


def _split_path(path):
    path = os.fspath(path)
    if path.endswith(META_SUFFIX):
        path = path[: -len(".meta")]
    if not path.endswith(PAYLOAD_SUFFIX):
        path = path + PAYLOAD_SUFFIX
    return Path(path), Path(path + ".meta")


def cube_paths(path):
    """``(payload, header)`` paths for a cube name, ``.hsr`` path or header path."""
    return _split_path(path)


def _parse_header(meta_path):
    try:
        text = meta_path.read_text()
    except FileNotFoundError:
        raise FileNotFoundError(f"missing header {meta_path}") from None
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"garbled header {meta_path}:{lineno}: {line!r}")
        fields[key.strip()] = value.strip()
    try:
        dims = tuple(int(fields[k]) for k in ("bands", "height", "width"))
        max_value = float(fields.get("max_value", "1.0"))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"garbled header {meta_path}: {exc}") from None
    for key, expected in _FORMAT_KEYS.items():
        if fields.get(key, expected) != expected:
            raise ValueError(f"unsupported {key} {fields[key]!r} in {meta_path}; expected {expected!r}")
    if min(dims) < 1 or not (max_value > 0 and np.isfinite(max_value)):
        raise ValueError(f"garbled header {meta_path}: invalid dimensions or max_value")
    return dims, max_value


def read_cube(path, normalize=True):
    """Load a cube written by :func:`write_cube`.

    With ``normalize`` the payload is divided by the header's ``max_value``.
    """
    payload_path, meta_path = _split_path(path)
    dims, max_value = _parse_header(meta_path)
    try:
        raw = payload_path.read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"missing payload {payload_path}") from None
    expected = int(np.prod(dims)) * 4
    if len(raw) != expected:
        raise ValueError(f"payload size mismatch: {payload_path} has {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{payload_path} contains non-finite values")
    if normalize and max_value != 1.0:
        data = (data / np.float32(max_value)).astype(np.float32)
    return HsiCube(data)


def write_cube(cube, path, max_value=1.0):
    """Write header and payload; the cube is validated before anything hits disk."""
    arr = np.asarray(cube)
    arr = check_cube(arr, dtype=np.float32)
    if arr.min() < 0 or arr.max() > max_value:
        raise ValueError(f"cube values must lie in [0, {max_value}]")
    payload_path, meta_path = _split_path(path)
    header = "\n".join(
        [
            f"bands = {arr.shape[0]}",
            f"height = {arr.shape[1]}",
            f"width = {arr.shape[2]}",
            *(f"{k} = {v}" for k, v in _FORMAT_KEYS.items()),
            f"max_value = {float(max_value)!r}",
            "",
        ]
    )
    payload_path.write_bytes(arr.astype("<f4", copy=False).tobytes(order="C"))
    meta_path.write_text(header)


@dataclass(frozen=True)
class PatchSpec:
    """Patch size/stride plus the augmentations to apply to each patch.

    ``stride`` defaults to ``size`` (non-overlapping tiles). ``sr_scale`` is
    the super-resolution factor the patches are destined for; every scaled
    patch edge must stay an integer no smaller than it.
    """

    size: int = 32
    stride: int | None = None
    scales: tuple = (1.0, 0.75, 0.5)
    rotate: bool = True
    flip: bool = True
    sr_scale: int = 1

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"patch size must be positive, got {self.size}")
        if self.stride is not None and self.stride < 1:
            raise ValueError(f"stride must be positive, got {self.stride}")
        if not self.scales:
            raise ValueError("at least one augmentation scale is required")
        for s in self.scales:
            edge = self.size * s
            if abs(edge - round(edge)) > 1e-9 or round(edge) < self.sr_scale:
                raise ValueError(
                    f"patch size {self.size} at scale {s} gives edge {edge}; "
                    f"must be an integer >= {self.sr_scale}"
                )

    @property
    def step(self):
        return self.size if self.stride is None else self.stride


def extract_patches(cube, spec):
    """Tile the cube row-major into ``L x size x size`` patches, dropping partial tiles."""
    arr = check_cube(cube)
    _, h, w = arr.shape
    size, step = spec.size, spec.step
    if size > min(h, w):
        raise ValueError(f"patch size {size} exceeds image extent {h}x{w}")
    return [
        arr[:, r : r + size, c : c + size].copy()
        for r in range(0, h - size + 1, step)
        for c in range(0, w - size + 1, step)
    ]


def rotate90(patch):
    """Rotate every band 90 degrees counter-clockwise."""
    return np.ascontiguousarray(np.rot90(patch, 1, axes=(1, 2)))


def hflip(patch):
    return np.ascontiguousarray(patch[:, :, ::-1])


def augment(patch, spec):
    """All ``scale x rotation x flip`` variants of one square patch.

    Order is scale-major, then rotation, then flip; the first variant is the
    unmodified patch when scale 1 is enabled.
    """
    arr = check_cube(patch, name="patch")
    if arr.shape[1] != arr.shape[2]:
        raise ValueError(f"patch must be square, got {arr.shape[1]}x{arr.shape[2]}")
    rotations = (False, True) if spec.rotate else (False,)
    flips = (False, True) if spec.flip else (False,)
    out = []
    for s in spec.scales:
        if s == 1:
            scaled = arr.copy()
        else:
            # bicubic overshoot would leave the [0, 1] reflectance range
            scaled = np.clip(resample_cube(arr, ResamplePlan(s, "cubic", True)), 0.0, 1.0)
        for rot in rotations:
            r = rotate90(scaled) if rot else scaled
            for fl in flips:
                out.append(hflip(r) if fl else r.copy())
    return out
