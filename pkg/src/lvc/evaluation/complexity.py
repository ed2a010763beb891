"""Temporal complexity: frame-to-frame change of block-DCT texture energy."""

from __future__ import annotations

import numpy as np

from lvc.evaluation.color import rgb_to_luma
from lvc.kernels import texture_energy

BLOCK = 32


def temporal_complexity(frames, block: int = BLOCK) -> float:
    """Mean over frames t >= 1 and blocks of |E_t - E_{t-1}|.

    E is the mean absolute non-DC DCT coefficient of each block of the 8-bit
    scaled luma.
    """
    frames = [np.asarray(f) for f in frames]
    if len(frames) < 2:
        raise ValueError("temporal complexity needs at least two frames")
    energies = [texture_energy(255.0 * rgb_to_luma(f), block) for f in frames]
    diffs = [np.abs(b - a).mean() for a, b in zip(energies[:-1], energies[1:])]
    return float(np.mean(diffs))
