"""BT.709 limited-range YUV 4:2:0 to RGB 4:4:4."""

from __future__ import annotations

import numpy as np

KR = 0.2126
KB = 0.0722
KG = 1.0 - KR - KB


def _positions(n_out: int, n_in: int, offset: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = np.clip(np.arange(n_out) / 2.0 + offset, 0.0, n_in - 1.0)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def upsample_chroma(plane: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear 2x upsampling; samples co-sited horizontally, centred vertically."""
    plane = np.asarray(plane, dtype=np.float64)
    y0, y1, ay = _positions(height, plane.shape[0], -0.25)
    x0, x1, ax = _positions(width, plane.shape[1], 0.0)
    rows = plane[y0] * (1 - ay)[:, None] + plane[y1] * ay[:, None]
    return rows[:, x0] * (1 - ax) + rows[:, x1] * ax


def ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    """Full-resolution limited-range planes to RGB in [0, 1]."""
    scale = 2 ** (bit_depth - 8)
    yn = (np.asarray(y, dtype=np.float64) - 16 * scale) / (219 * scale)
    pb = (np.asarray(cb, dtype=np.float64) - 128 * scale) / (224 * scale)
    pr = (np.asarray(cr, dtype=np.float64) - 128 * scale) / (224 * scale)
    r = yn + 2 * (1 - KR) * pr
    b = yn + 2 * (1 - KB) * pb
    g = yn - (2 * KB * (1 - KB) / KG) * pb - (2 * KR * (1 - KR) / KG) * pr
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def rgb_to_ycbcr(rgb: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    """Inverse matrix (no rounding, no chroma subsampling)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    scale = 2 ** (bit_depth - 8)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    yn = KR * r + KG * g + KB * b
    pb = (b - yn) / (2 * (1 - KB))
    pr = (r - yn) / (2 * (1 - KR))
    return np.stack([16 * scale + 219 * scale * yn, 128 * scale + 224 * scale * pb,
                     128 * scale + 224 * scale * pr], axis=-1)


def yuv420_to_rgb(y: np.ndarray, u: np.ndarray, v: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    y = np.asarray(y)
    h, w = y.shape
    if np.shape(u) != ((h + 1) // 2, (w + 1) // 2) or np.shape(v) != np.shape(u):
        raise ValueError(f"chroma planes {np.shape(u)}, {np.shape(v)} do not match luma {y.shape} for 4:2:0")
    return ycbcr_to_rgb(y, upsample_chroma(u, h, w), upsample_chroma(v, h, w), bit_depth)


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    return KR * rgb[..., 0] + KG * rgb[..., 1] + KB * rgb[..., 2]
