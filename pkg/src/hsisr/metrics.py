"""PSNR, SSIM and SAM for reflectance cubes in [0, 1].

PSNR and SSIM are computed band by band and averaged. SAM is the mean
per-pixel spectral angle in degrees.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .validation import check_cube, check_same_shape

__all__ = [
    "PSNR_CAP",
    "MetricReport",
    "psnr",
    "psnr_per_band",
    "ssim",
    "ssim_per_band",
    "spectral_angles",
    "sam_metric",
    "evaluate",
    "write_csv",
]

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(ref, test):
    a = check_cube(ref, name="ref", dtype=np.float64)
    b = check_cube(test, name="test", dtype=np.float64)
    check_same_shape(a, b)
    return a, b


def psnr_per_band(ref, test):
    a, b = _pair(ref, test)
    mse = ((a - b) ** 2).reshape(a.shape[0], -1).mean(axis=1)
    out = np.full(a.shape[0], PSNR_CAP)
    nz = mse > 0
    out[nz] = np.minimum(10.0 * np.log10(1.0 / mse[nz]), PSNR_CAP)
    return out


def psnr(ref, test):
    """Mean over bands of ``10 log10(1 / MSE)``; lossless bands count as 100 dB."""
    return float(psnr_per_band(ref, test).mean())


def _gaussian_window():
    x = np.arange(SSIM_WINDOW) - SSIM_WINDOW // 2
    g = np.exp(-(x**2) / (2 * SSIM_SIGMA**2))
    return g / g.sum()


def _valid_filter(img, g):
    # separable Gaussian over the trailing two axes, keeping only full windows
    r = len(g) // 2
    out = correlate1d(img, g, axis=-1, mode="constant")[..., r:-r]
    out = correlate1d(out, g, axis=-2, mode="constant")[..., r:-r, :]
    return out


def ssim_per_band(ref, test):
    a, b = _pair(ref, test)
    if min(a.shape[1:]) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[1]}x{a.shape[2]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    g = _gaussian_window()
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    mu_a = _valid_filter(a, g)
    mu_b = _valid_filter(b, g)
    var_a = _valid_filter(a * a, g) - mu_a**2
    var_b = _valid_filter(b * b, g) - mu_b**2
    cov = _valid_filter(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return (num / den).reshape(a.shape[0], -1).mean(axis=1)


def ssim(ref, test):
    """Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, range 1) over valid windows."""
    return float(ssim_per_band(ref, test).mean())


def spectral_angles(a, b):
    """Per-pixel angle in radians between the spectra of two ``(L, H, W)`` arrays.

    Pixels where either spectrum has zero norm get angle 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.sqrt(np.sum(a * a, axis=0))
    nb = np.sqrt(np.sum(b * b, axis=0))
    # Kahan's form: exact zero for identical spectra, accurate near 0 and pi
    diff = np.sqrt(np.sum((a * nb - b * na) ** 2, axis=0))
    summ = np.sqrt(np.sum((a * nb + b * na) ** 2, axis=0))
    ang = 2.0 * np.arctan2(diff, summ)
    return np.where((na > 0) & (nb > 0), ang, 0.0)


def sam_metric(ref, test):
    """Mean spectral angle in degrees."""
    a, b = _pair(ref, test)
    return float(np.degrees(spectral_angles(a, b).mean()))


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    sam: float
    psnr_bands: list = field(default_factory=list)
    ssim_bands: list = field(default_factory=list)

    def row(self, per_band=False):
        out = {"psnr_db": self.psnr, "ssim": self.ssim, "sam_deg": self.sam}
        if per_band:
            for k, v in enumerate(self.psnr_bands, 1):
                out[f"psnr_b{k}"] = v
            for k, v in enumerate(self.ssim_bands, 1):
                out[f"ssim_b{k}"] = v
        return out


def evaluate(ref, test):
    pb = psnr_per_band(ref, test)
    sb = ssim_per_band(ref, test)
    return MetricReport(
        psnr=float(pb.mean()),
        ssim=float(sb.mean()),
        sam=sam_metric(ref, test),
        psnr_bands=[float(v) for v in pb],
        ssim_bands=[float(v) for v in sb],
    )


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return v


def write_csv(path, rows, per_band=False):
    """Write ``(cube, method, MetricReport)`` rows to ``path``."""
    rows = list(rows)
    records = []
    for cube, method, report in rows:
        rec = {"cube": cube, "method": method}
        rec.update({k: _fmt(v) for k, v in report.row(per_band).items()})
        records.append(rec)
    fields = ["cube", "method", "psnr_db", "ssim", "sam_deg"]
    for rec in records:
        for k in rec:
            if k not in fields:
                fields.append(k)
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
