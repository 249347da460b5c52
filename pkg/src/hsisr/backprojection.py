"""Training-free back-projection refinement with a spectral-angle constraint.

Given a coarse upscaler ``F`` and an LR cube, with ``s`` the target scale::

    U = F(s, lr)            V = F(s/2, lr)
    M = bicubic(U, 1/2)     Z = V - M
    lam = angle(M, V)       D = lam * Z if lam < 1 else Z
    N = bicubic(D, 2)       I_SR = clip(U + N, 0, 1)

A single pass, no iterations and no learned parameters, so any upscaler
(including external SR methods via :func:`refine_from_cubes`) can be
post-processed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .metrics import spectral_angles
from .resample import bicubic
from .validation import check_cube, check_scale

__all__ = [
    "FineStageTrace",
    "spectral_angle",
    "constrain_residual",
    "refine",
    "refine_from_cubes",
    "bicubic_upscaler",
]

SAM_MODES = ("pixel", "global")


@dataclass
class FineStageTrace:
    U: np.ndarray
    V: np.ndarray
    M: np.ndarray
    Z: np.ndarray
    lambda_sam: float
    D: np.ndarray
    N: np.ndarray
    I_SR: np.ndarray

    def items(self):
        """Cube-valued intermediates in pipeline order."""
        return [("U", self.U), ("V", self.V), ("M", self.M), ("Z", self.Z), ("D", self.D), ("N", self.N), ("I_SR", self.I_SR)]


def spectral_angle(a, b, mode="pixel"):
    """Angle in radians between two cubes.

    ``"pixel"`` averages the per-pixel spectral angle; ``"global"`` treats
    each cube as one flattened vector.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if mode == "pixel":
        return float(spectral_angles(a, b).mean())
    if mode == "global":
        norm = np.linalg.norm(a.ravel()) * np.linalg.norm(b.ravel())
        if norm == 0:
            return 0.0
        return float(np.arccos(np.clip(np.dot(a.ravel(), b.ravel()) / norm, -1.0, 1.0)))
    raise ValueError(f"unknown SAM mode {mode!r}; expected one of {SAM_MODES}")


def constrain_residual(Z, lam):
    """Scale the residual by the angle when it is below one radian."""
    if lam < 1:
        return (Z * np.float32(lam)).astype(Z.dtype, copy=False)
    return Z.copy()


def refine_from_cubes(U, V, sam_mode="pixel", clip=True, return_trace=False):
    """Refine ``U`` (scale ``s``) using a second estimate ``V`` at scale ``s/2``."""
    U = check_cube(U, name="U")
    V = check_cube(V, name="V")
    if U.shape[0] != V.shape[0]:
        raise ValueError(f"band count mismatch: U has {U.shape[0]}, V has {V.shape[0]}")
    if U.shape[1:] != (2 * V.shape[1], 2 * V.shape[2]):
        raise ValueError(f"U {U.shape[1:]} must be exactly twice V {V.shape[1:]} spatially")
    M = bicubic(U, 0.5)
    Z = V - M
    lam = spectral_angle(M, V, sam_mode)
    D = constrain_residual(Z, lam)
    N = bicubic(D, 2)
    out = U + N
    if clip:
        out = np.clip(out, 0.0, 1.0)
    if return_trace:
        return out, FineStageTrace(U=U, V=V, M=M, Z=Z, lambda_sam=lam, D=D, N=N, I_SR=out)
    return out


def refine(coarse: Callable, lr, s, sam_mode="pixel", clip=True):
    """Run the upscaler at ``s`` and ``s/2`` and refine; returns ``(I_SR, trace)``.

    ``coarse(scale, cube)`` must return a cube enlarged by ``scale``.
    """
    s = check_scale(s, even=True)
    lr = check_cube(lr, name="lr")
    L, h, w = lr.shape
    U = check_cube(coarse(s, lr), name="U")
    V = check_cube(coarse(s // 2, lr), name="V")
    if U.shape != (L, s * h, s * w):
        raise ValueError(f"upscaler returned {U.shape} at x{s}, expected {(L, s * h, s * w)}")
    if V.shape != (L, s // 2 * h, s // 2 * w):
        raise ValueError(f"upscaler returned {V.shape} at x{s // 2}, expected {(L, s // 2 * h, s // 2 * w)}")
    return refine_from_cubes(U, V, sam_mode=sam_mode, clip=clip, return_trace=True)


def bicubic_upscaler(scale, cube):
    """Plain bicubic interpolation as a coarse upscaler baseline."""
    return bicubic(cube, scale)
