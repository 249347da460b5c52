"""Input validation helpers shared by the estimators and functional API."""

from __future__ import annotations

import numpy as np

__all__ = ["check_cube", "check_cube_batch", "check_same_shape", "check_scale"]


def check_cube(cube, *, name="cube", dtype=np.float32, min_bands=1, unit_range=False):
    """Return ``cube`` as a finite ``(bands, height, width)`` array.

    Anything exposing ``__array__`` (including :class:`hsisr.cube.HsiCube`)
    is accepted. A 2-D input is not promoted; callers working on single bands
    use the resampling functions directly.
    """
    arr = np.asarray(cube)
    if arr.ndim != 3:
        raise ValueError(f"{name} must have shape (bands, height, width), got {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"{name} is empty: shape {arr.shape}")
    if arr.shape[0] < min_bands:
        raise ValueError(f"{name} needs at least {min_bands} bands, got {arr.shape[0]}")
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if unit_range and (arr.min() < 0 or arr.max() > 1):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_cube_batch(X, *, name="X", dtype=np.float32, min_bands=1):
    """Validate a sequence of cubes sharing one shape; returns ``(n, L, H, W)``."""
    if isinstance(X, np.ndarray) and X.ndim == 4:
        cubes = list(X)
    elif isinstance(X, np.ndarray) and X.ndim == 3:
        cubes = [X]
    else:
        cubes = list(X)
    if not cubes:
        raise ValueError(f"{name} is empty")
    arrs = [check_cube(c, name=f"{name}[{k}]", dtype=dtype, min_bands=min_bands) for k, c in enumerate(cubes)]
    shape = arrs[0].shape
    for k, a in enumerate(arrs):
        if a.shape != shape:
            raise ValueError(f"{name}[{k}] has shape {a.shape}, expected {shape}")
    return np.stack(arrs)


def check_same_shape(a, b, names=("ref", "test")):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {names[0]} {a.shape} vs {names[1]} {b.shape}")


def check_scale(scale, *, power_of_two=False, even=False):
    if isinstance(scale, bool) or int(scale) != scale or scale < 1:
        raise ValueError(f"scale must be a positive integer, got {scale!r}")
    scale = int(scale)
    if power_of_two and scale & (scale - 1):
        raise ValueError(f"scale must be a power of 2, got {scale}")
    if even and scale % 2:
        raise ValueError(f"scale must be even, got {scale}")
    return scale
