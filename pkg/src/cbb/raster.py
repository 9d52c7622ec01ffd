"""Polygon rasterization, stimulus rendering, and image/mask file IO.

Scene coordinates live in [0, 1]^2 with y up; images put row 0 at the top.
The center of pixel (row i, col j) in an s-by-s mask is the scene point
((j + 0.5) / s, 1 - (i + 0.5) / s). A pixel belongs to the polygon iff its
center is inside under the even-odd rule with a strict intercept comparison.
The comparison is half-open: a center exactly on a shared edge belongs to
exactly one of the two abutting polygons, so adjacent shapes tile without
double-counting.

Rendered stimuli are flat-colored polygons on a black background, drawn in
one of 24 bright palette colors and pixel-aligned with the binary mask.

Masks on disk are PNGs (PGM also accepted on read). Binary masks are 8-bit
grayscale with values in {0, 255}. 16-bit grayscale files are read as
probability maps and binarized at one half (raw value >= 32768).
"""

from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MalformedMask

# 24 evenly spaced hues at full value and high saturation. Every channel
# sum clears 200, keeping each color far from the black background.
PALETTE: tuple[tuple[int, int, int], ...] = tuple(
    tuple(int(round(255 * c)) for c in colorsys.hsv_to_rgb(i / 24, 0.85, 1.0))
    for i in range(24)
)


def rasterize(verts: np.ndarray, size: int) -> np.ndarray:
    """Boolean (size, size) mask of the polygon's pixel-center coverage."""
    v = np.asarray(verts, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
        raise ValueError(f"need a polygon of >= 3 vertices, got shape {v.shape}")
    if size < 1:
        raise ValueError(f"size must be positive, got {size}")
    xs = (np.arange(size) + 0.5) / size
    ys = 1.0 - (np.arange(size) + 0.5) / size
    col_x = xs[None, :]
    row_y = ys[:, None]
    inside = np.zeros((size, size), dtype=bool)
    n = len(v)
    for k in range(n):
        x1, y1 = v[k]
        x2, y2 = v[(k + 1) % n]
        if y1 == y2:
            continue  # horizontal edges never satisfy the crossing test
        crosses = (y1 > row_y) != (y2 > row_y)
        xint = (x2 - x1) * (row_y - y1) / (y2 - y1) + x1
        inside ^= crosses & (col_x < xint)
    return inside


def render_image(verts: np.ndarray, color_index: int, size: int) -> np.ndarray:
    """Render the polygon as a flat-colored shape on black, (size, size, 3)
    uint8. Non-black pixels sit exactly where ``rasterize`` is true."""
    if not 0 <= color_index < len(PALETTE):
        raise ValueError(
            f"color_index must be in [0, {len(PALETTE) - 1}], got {color_index}"
        )
    mask = rasterize(verts, size)
    img = np.zeros((size, size, 3), dtype=np.uint8)
    img[mask] = PALETTE[color_index]
    return img


def write_image(path: str | Path, image: np.ndarray) -> None:
    """Write an RGB uint8 image as a PNG."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("image must be an (h, w, 3) uint8 array")
    Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")


def read_image(path: str | Path) -> np.ndarray:
    """Read an RGB PNG back as an (h, w, 3) uint8 array."""
    with Image.open(Path(path)) as img:
        if img.mode != "RGB":
            raise ValueError(f"{path}: expected an RGB image, got mode {img.mode!r}")
        arr = np.asarray(img)
    return arr


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    """Write a boolean mask as an 8-bit {0, 255} grayscale PNG."""
    arr = np.asarray(mask)
    if arr.dtype != np.bool_ or arr.ndim != 2:
        raise ValueError("mask must be a 2-d boolean array")
    img = Image.fromarray(arr.astype(np.uint8) * 255, mode="L")
    img.save(Path(path), format="PNG")


def read_mask(path: str | Path) -> np.ndarray:
    """Read a mask PNG as a boolean array.

    8-bit grayscale must be strictly binary ({0, 255}); 16-bit grayscale is
    treated as a probability map and thresholded at one half. Anything else
    raises MalformedMask.
    """
    with Image.open(Path(path)) as img:
        mode = img.mode
        arr = np.asarray(img)
    if mode == "1":
        return arr.astype(bool)
    if mode == "L":
        bad = ~np.isin(arr, (0, 255))
        if bad.any():
            raise MalformedMask(
                f"{path}: 8-bit mask holds values other than 0 and 255"
            )
        return arr == 255
    if mode in ("I", "I;16"):
        if arr.min() < 0 or arr.max() > 65535:
            raise MalformedMask(f"{path}: 16-bit mask values out of range")
        return arr >= 32768
    raise MalformedMask(f"{path}: unsupported image mode {mode!r}")
