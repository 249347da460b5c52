"""Neighbouring band partition.

For band ``i`` (1-based) of an ``L``-band cube a five-band window is chosen
and split into three groups that all contain ``i``: the band itself, its
immediate neighbours, and the outer pair of the window. Near the spectral
edges the window is pinned to the first or last five bands. The high-edge
third group is deliberately non-monotone: ``(L-3, i, L-4)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BandGroups", "window", "partition", "gather_groups"]


@dataclass(frozen=True)
class BandGroups:
    current: int
    g1: tuple
    g2: tuple
    g3: tuple

    def __iter__(self):
        return iter((self.g1, self.g2, self.g3))


def _check(i, L):
    if L < 5:
        raise ValueError(f"need at least 5 bands, got L={L}")
    if not 1 <= i <= L:
        raise ValueError(f"band index {i} outside [1, {L}]")


def window(i, L):
    """The five band indices (1-based) used to reconstruct band ``i``."""
    _check(i, L)
    if i < 3:
        return [1, 2, 3, 4, 5]
    if i <= L - 3:
        return [i - 2, i - 1, i, i + 1, i + 2]
    return [L - 4, L - 3, L - 2, L - 1, L]


def partition(i, L):
    _check(i, L)
    if i < 3:
        g2, g3 = (1, 2, 3), (4, i, 5)
    elif i <= L - 3:
        g2, g3 = (i - 1, i, i + 1), (i - 2, i, i + 2)
    else:
        g2, g3 = (L - 2, L - 1, L), (L - 3, i, L - 4)
    return BandGroups(current=i, g1=(i,), g2=g2, g3=g3)


def gather_groups(cube, groups):
    """Copy the grouped bands out of ``cube`` (band axis ``-3``).

    Works on a single ``(L, H, W)`` cube or a batch ``(N, L, H, W)``; returns
    three arrays with 1, 3 and 3 bands in group order.
    """
    arr = np.asarray(cube)
    if arr.ndim not in (3, 4):
        raise ValueError(f"expected (L, H, W) or (N, L, H, W), got shape {arr.shape}")
    L = arr.shape[-3]
    out = []
    for g in groups:
        for b in g:
            if not 1 <= b <= L:
                raise IndexError(f"band index {b} outside [1, {L}]")
        out.append(np.take(arr, [b - 1 for b in g], axis=-3))
    return tuple(out)
