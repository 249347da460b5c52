"""Hyperspectral image super-resolution toolkit.

A recurrent band-by-band coarse network (numpy autodiff, CPU only) and a
training-free back-projection refiner constrained by the spectral angle.
"""

from .backprojection import refine, refine_from_cubes
from .cube import HsiCube, read_cube, write_cube
from .estimators import BackProjectionRefiner, CoarSR, DualSR
from .metrics import evaluate, psnr, sam_metric, ssim
from .nbp import partition, window
from .resample import ResamplePlan, bicubic, degrade_pair, resample_cube
from .synth import SceneSpec, generate

__version__ = "0.1.0"

__all__ = [
    "BackProjectionRefiner",
    "CoarSR",
    "DualSR",
    "HsiCube",
    "ResamplePlan",
    "SceneSpec",
    "bicubic",
    "degrade_pair",
    "evaluate",
    "generate",
    "partition",
    "psnr",
    "read_cube",
    "refine",
    "refine_from_cubes",
    "resample_cube",
    "sam_metric",
    "ssim",
    "window",
    "write_cube",
]
