"""Observer models: maps from a reference mask to a reported mask.

- ExactObserver reports the mask unchanged.
- HullObserver reports the filled convex hull of the mask's support; any
  addition inside the hull is invisible to it, while additions that extend
  the hull are not.
- ClosingObserver reports the morphological closing with a Euclidean disk;
  narrow cavities (mouth narrower than the disk diameter) come back filled,
  which is the boundary-blindness being studied.
- ExternalObserver reports masks produced by an outside system, read from a
  directory keyed by trial id and role.

Morphology treats everything outside the frame as background. Distances come
from exact Euclidean distance transforms, so integer radii reproduce the
literal integer-offset disk definition bit for bit. The hull fill uses
integer half-plane arithmetic on pixel coordinates, which is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, MissingExternalMask
from .raster import read_mask


def _check_radius(radius: float) -> None:
    if not radius >= 0:
        raise ValueError(f"radius must be non-negative, got {radius}")


def dilate(mask: np.ndarray, radius: float) -> np.ndarray:
    """Disk dilation, cropped to the frame."""
    _check_radius(radius)
    m = np.asarray(mask, dtype=bool)
    if radius == 0 or not m.any():
        return m.copy()
    return ndimage.distance_transform_edt(~m) <= radius


def erode(mask: np.ndarray, radius: float) -> np.ndarray:
    """Disk erosion; beyond-frame pixels count as background (a one-pixel
    zero ring is enough: the nearest out-of-frame point of any pixel lies in
    the first ring)."""
    _check_radius(radius)
    m = np.asarray(mask, dtype=bool)
    if radius == 0 or not m.any():
        return m.copy()
    big = np.zeros((m.shape[0] + 2, m.shape[1] + 2), dtype=bool)
    big[1:-1, 1:-1] = m
    return ndimage.distance_transform_edt(big)[1:-1, 1:-1] > radius


def close(mask: np.ndarray, radius: float) -> np.ndarray:
    """Disk closing. Computed on a zero-padded frame so nothing is clipped:
    the closing lies inside the convex hull of the support, which lies
    inside the frame whenever the mask does."""
    _check_radius(radius)
    m = np.asarray(mask, dtype=bool)
    if radius == 0 or not m.any():
        return m.copy()
    pad = int(math.ceil(radius)) + 1
    h, w = m.shape
    big = np.zeros((h + 2 * pad, w + 2 * pad), dtype=bool)
    big[pad : pad + h, pad : pad + w] = m
    dilated = ndimage.distance_transform_edt(~big) <= radius
    closed = ndimage.distance_transform_edt(dilated) > radius
    return closed[pad : pad + h, pad : pad + w]


def _support_hull(xs: np.ndarray, ys: np.ndarray) -> list[tuple[int, int]]:
    """Convex hull of integer (x, y) points, counterclockwise, strict turns.

    Only each row's leftmost and rightmost support pixel can be a hull
    vertex, so the chain runs over at most two points per row.
    """
    order = np.lexsort((xs, ys))
    xs_s, ys_s = xs[order], ys[order]
    rows, first = np.unique(ys_s, return_index=True)
    last = np.r_[first[1:], len(ys_s)] - 1
    cand = {(int(x), int(y)) for x, y in zip(xs_s[first], rows)}
    cand |= {(int(x), int(y)) for x, y in zip(xs_s[last], rows)}
    pts = sorted(cand)
    if len(pts) <= 2:
        return pts

    def chain(seq):
        out: list[tuple[int, int]] = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) > 0:
                    break
                out.pop()
            out.append(p)
        return out[:-1]

    return chain(pts) + chain(reversed(pts))


def hull_fill(mask: np.ndarray) -> np.ndarray:
    """Fill the convex hull of the mask's support.

    A pixel is set iff its center lies inside or on the hull of the support
    pixels' centers. All coordinates are integers, so every half-plane test
    is exact.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError("mask must be a 2-d boolean array")
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        return m.copy()
    hull = _support_hull(xs.astype(np.int64), ys.astype(np.int64))
    y0, y1 = int(ys.min()), int(ys.max())
    x0, x1 = int(xs.min()), int(xs.max())
    rows = np.arange(y0, y1 + 1, dtype=np.int64)[:, None]
    cols = np.arange(x0, x1 + 1, dtype=np.int64)[None, :]
    inside = np.ones((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
    n = len(hull)
    for k in range(n):
        ax, ay = hull[k]
        bx, by = hull[(k + 1) % n]
        inside &= (bx - ax) * (rows - ay) - (by - ay) * (cols - ax) >= 0
    out = np.zeros_like(m)
    out[y0 : y1 + 1, x0 : x1 + 1] = inside
    return out


@dataclass(frozen=True)
class ExactObserver:
    def observe(
        self, mask: np.ndarray, trial_id: str = "", role: str = ""
    ) -> np.ndarray:
        return np.asarray(mask, dtype=bool).copy()

    @property
    def spec(self) -> str:
        return "exact"


@dataclass(frozen=True)
class HullObserver:
    def observe(
        self, mask: np.ndarray, trial_id: str = "", role: str = ""
    ) -> np.ndarray:
        return hull_fill(mask)

    @property
    def spec(self) -> str:
        return "hull"


@dataclass(frozen=True)
class ClosingObserver:
    radius: float

    def __post_init__(self) -> None:
        if not self.radius >= 1:
            raise ValueError(
                f"closing radius must be at least one pixel, got {self.radius}"
            )

    def observe(
        self, mask: np.ndarray, trial_id: str = "", role: str = ""
    ) -> np.ndarray:
        return close(mask, self.radius)

    @property
    def spec(self) -> str:
        return f"closing:{self.radius:g}"


@dataclass(frozen=True)
class ExternalObserver:
    """Reads `<trial_id>_<role>.png` from ``directory``; the mask argument
    only sets the expected frame size."""

    directory: Path

    def observe(
        self, mask: np.ndarray, trial_id: str = "", role: str = ""
    ) -> np.ndarray:
        path = Path(self.directory) / f"{trial_id}_{role}.png"
        if not path.is_file():
            raise MissingExternalMask(f"expected mask file {path}")
        out = read_mask(path)
        ref = np.asarray(mask)
        if out.shape != ref.shape:
            raise DimensionMismatch(
                f"{path}: mask is {out.shape}, reference frame is {ref.shape}"
            )
        return out

    @property
    def spec(self) -> str:
        return f"external:{self.directory}"


Observer = ExactObserver | HullObserver | ClosingObserver | ExternalObserver


def make_observer(spec: str) -> Observer:
    """Parse an observer spec string: ``exact``, ``hull``,
    ``closing:<radius>``, or ``external:<directory>``."""
    if spec == "exact":
        return ExactObserver()
    if spec == "hull":
        return HullObserver()
    kind, sep, arg = spec.partition(":")
    if kind == "closing" and sep:
        try:
            radius = float(arg)
        except ValueError:
            raise ValueError(f"bad closing radius {arg!r}") from None
        return ClosingObserver(radius=radius)
    if kind == "external" and sep and arg:
        return ExternalObserver(directory=Path(arg))
    raise ValueError(
        f"unknown observer spec {spec!r}; "
        "expected exact, hull, closing:<radius>, or external:<dir>"
    )
