"""Synthetic training/evaluation clips: textured planes under drifting motion."""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def textured_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Random colour texture in [0, 1], HxWx3: faint oriented gratings over blurred noise."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.zeros((height, width, 3))
    for _ in range(6):
        freq = rng.uniform(0.02, 0.2)
        theta = rng.uniform(0, np.pi)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
        img += wave[..., None] * rng.uniform(0.05, 0.3, size=3)
    # aperiodic detail keeps motion unambiguous
    blobs = ndimage.gaussian_filter(rng.normal(size=(height, width, 3)), sigma=(2, 2, 0))
    img += 5.0 * blobs
    img -= img.min()
    img /= max(img.max(), 1e-8)
    return img


def synthetic_clip(rng: np.random.Generator, frames: int, height: int, width: int,
                   max_speed: float = 2.0, max_spin_deg: float = 1.0,
                   noise: float = 0.01) -> np.ndarray:
    """A (frames, H, W, 3) float32 clip of a texture translating and rotating."""
    canvas = textured_image(rng, 2 * height, 2 * width)
    vx, vy = rng.uniform(-max_speed, max_speed, size=2)
    spin = np.deg2rad(rng.uniform(-max_spin_deg, max_spin_deg))
    cy, cx = height - 0.5, width - 0.5
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy -= (height - 1) / 2.0
    xx -= (width - 1) / 2.0
    out = np.empty((frames, height, width, 3), dtype=np.float32)
    for t in range(frames):
        a = spin * t
        sx = np.cos(a) * xx - np.sin(a) * yy + cx + vx * t
        sy = np.sin(a) * xx + np.cos(a) * yy + cy + vy * t
        for c in range(3):
            out[t, ..., c] = ndimage.map_coordinates(canvas[..., c], [sy, sx], order=1, mode="mirror")
    if noise:
        out += rng.normal(scale=noise, size=out.shape).astype(np.float32)
    return np.clip(out, 0.0, 1.0)


class SyntheticClips:
    """Deterministic bank of synthetic clips addressed by index."""

    def __init__(self, count: int = 64, frames: int = 5, size: int = 64, seed: int = 0, **motion):
        self.count = count
        self.frames = frames
        self.size = size
        self.seed = seed
        self.motion = motion

    def __len__(self):
        return self.count

    def __getitem__(self, index: int) -> np.ndarray:
        if not 0 <= index < self.count:
            raise IndexError(index)
        rng = np.random.default_rng([self.seed, index])
        return synthetic_clip(rng, self.frames, self.size, self.size, **self.motion)


class ClipFolder:
    """Clips cut from in-memory sequences (e.g. decoded YUV files), cropped at random."""

    def __init__(self, sequences: list[np.ndarray], frames: int = 5, size: int = 64):
        self.sequences = [s for s in sequences if s.shape[0] >= frames and min(s.shape[1:3]) >= size]
        if not self.sequences:
            raise ValueError(f"no sequence has {frames} frames of at least {size}x{size}")
        self.frames = frames
        self.size = size

    def __len__(self):
        return sum(s.shape[0] - self.frames + 1 for s in self.sequences)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        seq = self.sequences[rng.integers(len(self.sequences))]
        t = rng.integers(seq.shape[0] - self.frames + 1)
        y = rng.integers(seq.shape[1] - self.size + 1)
        x = rng.integers(seq.shape[2] - self.size + 1)
        return seq[t:t + self.frames, y:y + self.size, x:x + self.size].astype(np.float32)
