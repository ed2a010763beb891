"""PSNR, Bjontegaard-delta rate and dataset aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

PSNR_CAP = 100.0


def psnr_rgb(a, b) -> float:
    """PSNR over all three channels of [0, 1] frames, capped at 100 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


class BDError(ValueError):
    pass


@dataclass
class RDCurve:
    points: list  # (bpp, psnr)

    def __post_init__(self):
        pts = sorted((float(r), float(q)) for r, q in self.points)
        self.points = pts

    @property
    def bpp(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def psnr(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def validate(self, min_points: int = 4) -> None:
        if len(self.points) < min_points:
            raise BDError(f"BD-rate needs at least {min_points} points, got {len(self.points)}")
        if np.any(self.bpp <= 0):
            raise BDError("bpp must be positive")
        if np.any(np.diff(self.bpp) <= 0):
            raise BDError("bpp must be strictly increasing")
        if np.any(np.diff(self.psnr) <= 0):
            raise BDError("PSNR must increase strictly with rate")

    def log_rate_interpolant(self) -> PchipInterpolator:
        return PchipInterpolator(self.psnr, np.log10(self.bpp))


@dataclass
class BDResult:
    percent: float
    psnr_overlap: tuple


def psnr_overlap(anchor: RDCurve, test: RDCurve) -> tuple[float, float]:
    low = max(anchor.psnr.min(), test.psnr.min())
    high = min(anchor.psnr.max(), test.psnr.max())
    if not high > low:
        raise BDError(f"curves share no PSNR range ({low:.3f} >= {high:.3f})")
    return float(low), float(high)


def bd_rate(anchor: RDCurve, test: RDCurve) -> BDResult:
    """Average rate difference (%) of ``test`` against ``anchor`` at equal PSNR.

    log10(bpp) is interpolated as a monotone piecewise cubic in PSNR and its
    difference integrated exactly over the shared PSNR range.
    """
    anchor.validate()
    test.validate()
    low, high = psnr_overlap(anchor, test)
    fa = anchor.log_rate_interpolant()
    ft = test.log_rate_interpolant()
    mean_diff = (ft.integrate(low, high) - fa.integrate(low, high)) / (high - low)
    return BDResult(float((10.0 ** mean_diff - 1.0) * 100.0), (low, high))


def aggregate_bd(results) -> float:
    """Arithmetic mean of per-sequence BD-rates."""
    values = [r.percent if isinstance(r, BDResult) else float(r) for r in results]
    if not values:
        raise BDError("no BD-rates to aggregate")
    return float(np.mean(values))
