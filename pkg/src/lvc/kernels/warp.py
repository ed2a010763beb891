"""Bilinear backward warping with border replication (array reference).

Array counterpart of the torch warp used inside the networks: same sampling
positions, same clamping. Used for checks and for callers holding numpy data.
"""

import math

import numpy as np

from lvc._jit import JIT_ENABLED, njit


@njit(cache=True)
def _warp_jit(source, flow):
    c_n, h, w = source.shape
    out = np.empty_like(source)
    for y in range(h):
        for x in range(w):
            sx = min(max(x + flow[y, x, 0], 0.0), w - 1.0)
            sy = min(max(y + flow[y, x, 1], 0.0), h - 1.0)
            x0 = int(math.floor(sx))
            y0 = int(math.floor(sy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            ax = sx - x0
            ay = sy - y0
            for c in range(c_n):
                top = source[c, y0, x0] * (1.0 - ax) + source[c, y0, x1] * ax
                bot = source[c, y1, x0] * (1.0 - ax) + source[c, y1, x1] * ax
                out[c, y, x] = top * (1.0 - ay) + bot * ay
    return out


def _warp_np(source, flow):
    _, h, w = source.shape
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = np.clip(gx + flow[..., 0], 0.0, w - 1.0)
    sy = np.clip(gy + flow[..., 1], 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = sx - x0
    ay = sy - y0
    top = source[:, y0, x0] * (1.0 - ax) + source[:, y0, x1] * ax
    bot = source[:, y1, x0] * (1.0 - ax) + source[:, y1, x1] * ax
    return top * (1.0 - ay) + bot * ay


def warp_array(source: np.ndarray, flow: np.ndarray, channels_last: bool = False,
               use_jit: bool | None = None) -> np.ndarray:
    """Warp a CxHxW array (HxWxC with ``channels_last``; HxW also accepted)
    by an HxWx2 pixel flow holding (dx, dy)."""
    source = np.asarray(source, dtype=np.float64)
    flow = np.asarray(flow, dtype=np.float64)
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    if source.ndim == 2:
        src = source[None]
    elif channels_last:
        src = np.moveaxis(source, -1, 0)
    else:
        src = source
    if src.shape[1:] != flow.shape[:2] or flow.shape[-1] != 2:
        raise ValueError(f"source {source.shape} and flow {flow.shape} sizes differ")
    src = np.ascontiguousarray(src)
    jit = JIT_ENABLED if use_jit is None else (use_jit and JIT_ENABLED)
    out = _warp_jit(src, np.ascontiguousarray(flow)) if jit else _warp_np(src, flow)
    if source.ndim == 2:
        return out[0]
    return np.moveaxis(out, 0, -1) if channels_last else out
