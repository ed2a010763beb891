"""Raw video ingestion: planar YUV 4:2:0 files, image folders and .npy clips."""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from lvc.evaluation.color import yuv420_to_rgb

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
_SIZE_IN_NAME = re.compile(r"(\d+)x(\d+)(?:_(\d+(?:\.\d+)?))?")


def read_sidecar(path: Path) -> dict:
    """Resolution and frame rate for a .yuv file.

    Looks for ``<file>.json`` (keys width, height, fps) and falls back to a
    ``WxH[_fps]`` token in the file name.
    """
    path = Path(path)
    for cand in (path.with_name(path.name + ".json"), path.with_suffix(".json")):
        if cand.exists():
            meta = json.loads(cand.read_text())
            return {"width": int(meta["width"]), "height": int(meta["height"]),
                    "fps": float(meta.get("fps", 30.0))}
    m = _SIZE_IN_NAME.search(path.stem)
    if m is None:
        raise ValueError(f"{path}: no sidecar and no WxH in the file name")
    return {"width": int(m.group(1)), "height": int(m.group(2)),
            "fps": float(m.group(3)) if m.group(3) else 30.0}


def read_yuv420(path, width: int, height: int, max_frames: int | None = None):
    """Yield (Y, U, V) uint8 planes."""
    cw, ch = (width + 1) // 2, (height + 1) // 2
    frame_size = width * height + 2 * cw * ch
    data = np.fromfile(path, dtype=np.uint8)
    count = data.size // frame_size
    if max_frames is not None:
        count = min(count, max_frames)
    for i in range(count):
        f = data[i * frame_size:(i + 1) * frame_size]
        y = f[: width * height].reshape(height, width)
        u = f[width * height: width * height + cw * ch].reshape(ch, cw)
        v = f[width * height + cw * ch:].reshape(ch, cw)
        yield y, u, v


def write_yuv420(path, frames_yuv) -> None:
    with open(path, "wb") as fh:
        for y, u, v in frames_yuv:
            for plane in (y, u, v):
                fh.write(np.ascontiguousarray(plane, dtype=np.uint8).tobytes())


def load_sequence(path, max_frames: int | None = None) -> np.ndarray:
    """Load a sequence as (T, H, W, 3) float32 RGB in [0, 1]."""
    path = Path(path)
    if path.is_dir():
        from PIL import Image

        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if max_frames is not None:
            files = files[:max_frames]
        if not files:
            raise ValueError(f"{path}: no image files")
        frames = [np.asarray(Image.open(p).convert("RGB"), dtype=np.float32) / 255.0 for p in files]
        return np.stack(frames)
    if path.suffix == ".npy":
        arr = np.load(path)
        return arr[:max_frames].astype(np.float32)
    if path.suffix == ".yuv":
        meta = read_sidecar(path)
        frames = [yuv420_to_rgb(y, u, v) for y, u, v in
                  read_yuv420(path, meta["width"], meta["height"], max_frames)]
        if not frames:
            raise ValueError(f"{path}: file holds no complete frame")
        return np.stack(frames).astype(np.float32)
    raise ValueError(f"{path}: unsupported input (expected .yuv, .npy or an image folder)")
