"""Deterministic 50x50 RGB software camera over the unit-square workspace.

Pixel (row, col) has its center at workspace point
``((col + 0.5) / 50, 1 - (row + 0.5) / 50)``: row 0 is the top edge, y points
up.  Shapes are hard-edged (a pixel takes the color iff its center is inside),
which keeps every frame bit-reproducible.

Images are float64 arrays of shape (50, 50, 3) in [0, 1].  Flattening is
row-major and pixel-major, i.e. R, G, B of pixel (0, 0), then pixel (0, 1), ...
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

WIDTH = 50
HEIGHT = 50
CHANNELS = 3
PX_PER_UNIT = 50.0
SENSOR_DIM = WIDTH * HEIGHT * CHANNELS

WHITE = (1.0, 1.0, 1.0)
BLACK = (0.0, 0.0, 0.0)
RED = (1.0, 0.0, 0.0)
BLUE = (0.0, 0.0, 1.0)

ARM_THICKNESS_PX = 2.0

# Pixel-center coordinates in pixel units (x right, y up).
_COLS = np.arange(WIDTH) + 0.5
_ROWS_Y = HEIGHT - (np.arange(HEIGHT) + 0.5)
_PX, _PY = np.meshgrid(_COLS, _ROWS_Y)


def _to_px(p) -> tuple[float, float]:
    return float(p[0]) * PX_PER_UNIT, float(p[1]) * PX_PER_UNIT


def raster_clear(color=WHITE) -> np.ndarray:
    img = np.empty((HEIGHT, WIDTH, CHANNELS))
    img[:] = np.clip(np.asarray(color, dtype=np.float64), 0.0, 1.0)
    return img


def disk_mask(center, radius: float) -> np.ndarray:
    cx, cy = _to_px(center)
    r = radius * PX_PER_UNIT
    return (_PX - cx) ** 2 + (_PY - cy) ** 2 <= r * r


def capsule_mask(p1, p2, thickness_px: float) -> np.ndarray:
    ax, ay = _to_px(p1)
    bx, by = _to_px(p2)
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    if ll == 0.0:
        t = np.zeros_like(_PX)
    else:
        t = np.clip(((_PX - ax) * dx + (_PY - ay) * dy) / ll, 0.0, 1.0)
    ex = _PX - (ax + t * dx)
    ey = _PY - (ay + t * dy)
    half = thickness_px / 2.0
    return ex * ex + ey * ey <= half * half


def raster_disk(img: np.ndarray, center, radius: float, color) -> np.ndarray:
    """Paint a filled disk in place (radius in workspace units) and return ``img``."""
    img[disk_mask(center, radius)] = np.clip(np.asarray(color, dtype=np.float64), 0.0, 1.0)
    return img


def raster_segment(img: np.ndarray, p1, p2, thickness: float, color) -> np.ndarray:
    """Paint a capsule of the given pixel thickness in place and return ``img``."""
    if thickness < 1.0:
        raise ValueError("thickness must be at least 1 px")
    img[capsule_mask(p1, p2, thickness)] = np.clip(np.asarray(color, dtype=np.float64), 0.0, 1.0)
    return img


def flatten(img: np.ndarray) -> np.ndarray:
    if img.shape != (HEIGHT, WIDTH, CHANNELS):
        raise ValueError(f"image must have shape {(HEIGHT, WIDTH, CHANNELS)}")
    return np.ascontiguousarray(img).reshape(-1).copy()


def unflatten(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (SENSOR_DIM,):
        raise ValueError(f"sensor vector must have length {SENSOR_DIM}")
    return v.reshape(HEIGHT, WIDTH, CHANNELS).copy()


def render_arm(points) -> np.ndarray:
    """Flattened image of an arm given its joint positions base -> tip."""
    img = raster_clear(WHITE)
    for a, b in zip(points[:-1], points[1:]):
        raster_segment(img, a, b, ARM_THICKNESS_PX, BLUE)
    return flatten(img)


def render_object(center, radius: float, color) -> np.ndarray:
    """Flattened image of a single colored disk on a white background."""
    img = raster_clear(WHITE)
    raster_disk(img, center, radius, color)
    return flatten(img)


def ppm_bytes(img: np.ndarray) -> bytes:
    """Binary P6 encoding, channel byte = round(value * 255)."""
    if img.ndim == 1:
        img = unflatten(img)
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w, _ = data.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + data.tobytes()


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    Path(path).write_bytes(ppm_bytes(img))


def read_ppm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    # Exactly one whitespace byte separates the header from the raster.
    data = np.frombuffer(raw[pos + 1: pos + 1 + w * h * 3], dtype=np.uint8)
    return data.reshape(h, w, 3).astype(np.float64) / maxval
