"""On-disk raster formats.

Images and class maps are lossless 8-bit PNG; depth and flow grids are raw
float32 ``.crdo`` files with a 16-byte header {magic "CRDO", version u32,
H u32, W u32}, little-endian, row-major, channel-last (the channel count is
inferred from the file size).  Image values live on the 8-bit lattice inside
[-1, 1] (see ``core.quantize_unit``), so PNG round-trips are bit-exact.

Multi-frame samples (optical flow pairs) are stored as a single PNG with the
frames tiled side by side; the loader splits them back into a 6-channel grid.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .core import ImageGrid

CRDO_MAGIC = b"CRDO"
CRDO_VERSION = 1


def _to_u8(values):
    return np.clip(np.round((values.astype(np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _from_u8(u8):
    return (u8.astype(np.float32) / 127.5 - 1.0).astype(np.float32)


def save_image_png(path, grid: ImageGrid):
    v = grid.values
    if v.shape[2] % 3:
        raise ValueError(f"image channels must be a multiple of 3, got {v.shape[2]}")
    frames = v.shape[2] // 3
    if frames > 1:
        v = np.concatenate([v[:, :, 3 * i : 3 * i + 3] for i in range(frames)], axis=1)
    Image.fromarray(_to_u8(v), mode="RGB").save(path, format="PNG")


def load_image_png(path, channels=3) -> ImageGrid:
    arr = np.asarray(Image.open(path).convert("RGB"))
    if channels % 3:
        raise ValueError(f"channels must be a multiple of 3, got {channels}")
    frames = channels // 3
    if frames > 1:
        w = arr.shape[1] // frames
        arr = np.concatenate([arr[:, i * w : (i + 1) * w] for i in range(frames)], axis=2)
    return ImageGrid(_from_u8(arr))


def save_class_map_png(path, classes):
    c = np.asarray(classes)
    if c.min(initial=0) < 0 or c.max(initial=0) > 255:
        raise ValueError("class indices must fit in uint8")
    Image.fromarray(c.astype(np.uint8), mode="L").save(path, format="PNG")


def load_class_map_png(path):
    return np.asarray(Image.open(path).convert("L")).astype(np.int32)


def save_grid_crdo(path, grid):
    """Write an HxW or HxWxC float32 grid."""
    g = np.asarray(grid, dtype=np.float32)
    if g.ndim == 2:
        g = g[:, :, None]
    if g.ndim != 3:
        raise ValueError(f"grid must be HxW or HxWxC, got shape {g.shape}")
    h, w, _ = g.shape
    with open(path, "wb") as f:
        f.write(CRDO_MAGIC)
        f.write(struct.pack("<III", CRDO_VERSION, h, w))
        f.write(np.ascontiguousarray(g, dtype="<f4").tobytes())


def load_grid_crdo(path):
    """Read a grid back as HxWxC float32 (C inferred from the payload size)."""
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16 or header[:4] != CRDO_MAGIC:
            raise ValueError(f"{path}: not a CRDO grid file")
        version, h, w = struct.unpack("<III", header[4:])
        if version != CRDO_VERSION:
            raise ValueError(f"{path}: unsupported CRDO version {version}")
        payload = f.read()
    if h * w == 0 or len(payload) % (4 * h * w):
        raise ValueError(f"{path}: payload size {len(payload)} inconsistent with {h}x{w}")
    c = len(payload) // (4 * h * w)
    return np.frombuffer(payload, dtype="<f4").reshape(h, w, c).astype(np.float32)
