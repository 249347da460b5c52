"""Separable image resampling and the LR/HR degradation pipeline.

Every resize is expressed as a per-axis tap table ``(indices, weights)``:
output sample ``i`` reads ``T`` source samples around the center
``(i + 0.5) * n_in / n_out - 0.5``. Borders are handled by edge replication
and each row of weights is renormalised to sum to one, so constant images
are fixed points for every kernel and scale.

The second half of every tap table is the mirror image of the first half and
the taps of a row are summed in symmetric pairs. That makes resampling
commute *bitwise* with horizontal and vertical flips for the symmetric
kernels provided here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .validation import check_cube

__all__ = [
    "Kernel",
    "KERNELS",
    "ResamplePlan",
    "get_kernel",
    "tap_weights",
    "resample_weights",
    "resample_band",
    "resample_cube",
    "bicubic",
    "degrade_pair",
]


@dataclass(frozen=True)
class Kernel:
    name: str
    func: Callable[[np.ndarray], np.ndarray]
    support: float


def _cubic(x, a=-0.5):
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    near = (a + 2) * ax3 - (a + 3) * ax2 + 1
    far = a * ax3 - 5 * a * ax2 + 8 * a * ax - 4 * a
    return np.where(ax <= 1, near, np.where(ax < 2, far, 0.0))


def _lanczos3(x):
    ax = np.abs(x)
    return np.where(ax < 3, np.sinc(ax) * np.sinc(ax / 3), 0.0)


def _box(x):
    ax = np.abs(x)
    # half weight on the exact edge keeps the kernel symmetric
    return np.where(ax < 0.5, 1.0, np.where(ax == 0.5, 0.5, 0.0))


def _linear(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


KERNELS = {
    "cubic": Kernel("cubic", _cubic, 2.0),
    "lanczos": Kernel("lanczos", _lanczos3, 3.0),
    "box": Kernel("box", _box, 0.5),
    "linear": Kernel("linear", _linear, 1.0),
}


def get_kernel(kernel):
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {sorted(KERNELS)}") from None


def tap_weights(kernel, phase):
    """Normalised unstretched weights for a sample ``phase`` pixels past a source tap.

    ``tap_weights("cubic", 0.5)`` gives the half-pel bicubic filter
    ``(-0.0625, 0.5625, 0.5625, -0.0625)``.
    """
    k = get_kernel(kernel)
    radius = math.ceil(k.support)
    offsets = np.arange(-radius + 1, radius + 1, dtype=np.float64)
    w = k.func(offsets - phase)
    return w / w.sum()


@dataclass(frozen=True)
class ResamplePlan:
    """Scale factor, kernel and antialiasing flag for one resize.

    ``antialias`` only matters when shrinking; the kernel is then stretched
    by ``1 / scale``. Borders are always edge-replicated.
    """

    scale: float
    kernel: str = "cubic"
    antialias: bool = True

    def __post_init__(self):
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise ValueError(f"scale must be positive, got {self.scale!r}")
        get_kernel(self.kernel)

    def output_size(self, n):
        out = round(n * self.scale)
        if out < 1 or abs(n * self.scale - out) > 1e-9:
            if self.scale < 1 and abs(1 / self.scale - round(1 / self.scale)) < 1e-9:
                raise ValueError(
                    f"size {n} is not divisible by the integer downscale factor {round(1 / self.scale)}"
                )
            raise ValueError(f"size {n} scaled by {self.scale} is not an integer")
        return out


@lru_cache(maxsize=256)
def _taps(n_in, n_out, kernel_name, antialias):
    k = KERNELS[kernel_name]
    ratio = n_in / n_out
    stretch = ratio if (antialias and ratio > 1) else 1.0
    support = k.support * stretch
    n_taps = int(math.ceil(2 * support)) + 2
    if n_out % 2 and (n_taps - n_in) % 2:
        # middle row must be centred on its taps: parity of T must follow n_in
        n_taps += 1
    idx = np.empty((n_out, n_taps), dtype=np.int64)
    w = np.empty((n_out, n_taps), dtype=np.float64)
    half = (n_out + 1) // 2
    for i in range(half):
        center = (i + 0.5) * ratio - 0.5
        if n_out % 2 and i == half - 1:
            first = int(round(center - (n_taps - 1) / 2))
        else:
            first = math.floor(center - support)
        pos = np.arange(first, first + n_taps, dtype=np.int64)
        wi = k.func((pos - center) / stretch)
        w[i] = wi / wi.sum()
        idx[i] = np.clip(pos, 0, n_in - 1)
    for i in range(half, n_out):
        m = n_out - 1 - i
        idx[i] = (n_in - 1 - idx[m])[::-1]
        w[i] = w[m][::-1]
    idx.setflags(write=False)
    w.setflags(write=False)
    return idx, w


def resample_weights(n_in, n_out, kernel="cubic", antialias=True):
    """Tap table ``(indices, weights)``, each of shape ``(n_out, T)``."""
    return _taps(int(n_in), int(n_out), get_kernel(kernel).name, bool(antialias))


def _apply_axis(x, idx, w):
    # x: (..., n_in) -> (..., n_out)
    prods = x[..., idx] * w
    n_taps = w.shape[1]
    half = n_taps // 2
    pairs = prods[..., :half] + prods[..., ::-1][..., :half]
    out = pairs.sum(axis=-1)
    if n_taps % 2:
        out = out + prods[..., half]
    return out


def _resample(arr, plan):
    h, w = arr.shape[-2:]
    oh, ow = plan.output_size(h), plan.output_size(w)
    name = get_kernel(plan.kernel).name
    out_dtype = np.float32 if arr.dtype == np.float32 else np.float64
    x = arr.astype(np.float64, copy=False)
    if (oh, ow) == (h, w):
        return x.astype(out_dtype, copy=True)
    ri, rw = _taps(w, ow, name, plan.antialias)
    x = _apply_axis(x, ri, rw)
    ci, cw = _taps(h, oh, name, plan.antialias)
    x = _apply_axis(np.swapaxes(x, -1, -2), ci, cw)
    return np.ascontiguousarray(np.swapaxes(x, -1, -2)).astype(out_dtype, copy=False)


def resample_band(image, plan):
    """Resize one 2-D band: rows first, then columns."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("image is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return _resample(arr, plan)


def resample_cube(cube, plan):
    """Resize every band of a ``(L, H, W)`` cube with the same plan."""
    arr = check_cube(cube, dtype=None)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float32)
    return _resample(arr, plan)


def bicubic(cube, scale):
    """Keys bicubic (a = -0.5) resize with antialiasing when shrinking.

    Works on a single band or a cube; signed inputs (residuals) are allowed.
    """
    arr = np.asarray(cube)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected a band or a cube, got shape {arr.shape}")
    plan = ResamplePlan(scale, "cubic", True)
    if arr.ndim == 2:
        return resample_band(arr, plan)
    return resample_cube(arr, plan)


def degrade_pair(hr, s, kernel="cubic"):
    """Build an ``(lr, hr)`` training pair by antialiased integer downscaling."""
    hr = check_cube(hr, name="hr")
    if isinstance(s, bool) or int(s) != s or s < 1:
        raise ValueError(f"scale factor must be a positive integer, got {s!r}")
    s = int(s)
    _, h, w = hr.shape
    if h % s or w % s:
        raise ValueError(f"HR size {h}x{w} is not divisible by scale factor {s}")
    lr = resample_cube(hr, ResamplePlan(1.0 / s, kernel, True))
    return lr, hr
