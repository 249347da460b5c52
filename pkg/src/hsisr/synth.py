"""Synthetic hyperspectral scenes from a linear mixing model.

Each scene mixes ``K`` smooth, strictly positive spectral signatures with
abundance maps that are smoothed random fields pushed through a softmax, so
abundances are nonnegative and sum to one at every pixel. Smooth signatures
give the strong adjacent-band correlation real scenes show.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = ["SceneSpec", "generate", "signatures", "abundances", "adjacent_band_correlation"]


@dataclass(frozen=True)
class SceneSpec:
    bands: int = 16
    height: int = 64
    width: int = 64
    materials: int = 4
    smoothness: float = 8.0
    sharpness: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.materials < 1:
            raise ValueError(f"need at least one material, got {self.materials}")
        if self.bands < 1 or self.height < 8 or self.width < 8:
            raise ValueError(
                f"degenerate scene size {self.bands}x{self.height}x{self.width}; "
                "need bands >= 1 and spatial dims >= 8"
            )
        if self.smoothness < 0:
            raise ValueError("smoothness must be non-negative")


def signatures(rng, materials, bands):
    """``(materials, bands)`` positive curves.

    Each curve is a brightness level times a shape in [0.6, 1] built from
    three Gaussian bumps. Levels are spaced by a factor of 1.8 so curves do
    not cross, which keeps neighbouring bands strongly correlated.
    """
    t = np.linspace(0.0, 1.0, bands)
    levels = rng.permutation(1.8 ** -np.arange(materials)) * rng.uniform(0.9, 1.0, materials)
    sig = np.empty((materials, bands))
    for k in range(materials):
        shape = np.zeros(bands)
        for _ in range(3):
            mu = rng.uniform(-0.2, 1.2)
            width = rng.uniform(0.2, 0.5)
            shape += rng.uniform(0.2, 1.0) * np.exp(-0.5 * ((t - mu) / width) ** 2)
        shape /= max(shape.max(), 1e-12)
        sig[k] = levels[k] * (0.6 + 0.4 * shape)
    return sig


def abundances(rng, materials, height, width, smoothness, sharpness):
    """Per-pixel mixing weights, shape ``(materials, height, width)``, summing to one."""
    fields = rng.standard_normal((materials, height, width))
    if smoothness > 0:
        fields = np.stack([gaussian_filter(f, smoothness, mode="wrap") for f in fields])
    fields /= fields.std() + 1e-12
    logits = sharpness * fields
    logits -= logits.max(axis=0, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=0, keepdims=True)


def generate(spec):
    """Render a ``(bands, height, width)`` float32 cube with values in [0, 1]."""
    rng = np.random.default_rng(spec.seed)
    sig = signatures(rng, spec.materials, spec.bands)
    ab = abundances(rng, spec.materials, spec.height, spec.width, spec.smoothness, spec.sharpness)
    cube = np.einsum("khw,kl->lhw", ab, sig)
    cube /= cube.max()
    return np.clip(cube, 0.0, 1.0).astype(np.float32)


def adjacent_band_correlation(cube):
    """Pearson correlation between every pair of neighbouring bands."""
    arr = np.asarray(cube, dtype=np.float64)
    flat = arr.reshape(arr.shape[0], -1)
    out = []
    for a, b in zip(flat[:-1], flat[1:]):
        if a.std() == 0 or b.std() == 0:
            # flat bands (single-material scenes) carry no spatial signal to correlate
            out.append(1.0 if a.std() == b.std() else 0.0)
        else:
            out.append(float(np.corrcoef(a, b)[0, 1]))
    return np.array(out)
