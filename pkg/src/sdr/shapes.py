"""Synthetic object silhouettes used as the fixture image set.

Shapes live in the unit square (y pointing down, like image rows) and are
built from a handful of primitives combined by union and difference. They
can be rasterized at any resolution, which is what the resolution
independence checks rely on.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .imaging import GrayImage

Inside = Callable[[np.ndarray, np.ndarray], np.ndarray]


def polygon(*vertices) -> Inside:
    v = np.asarray(vertices, dtype=np.float64)

    def inside(x, y):
        res = np.zeros(x.shape, dtype=bool)
        x0, y0 = v[-1]
        for x1, y1 in v:
            crosses = (y1 > y) != (y0 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            res ^= crosses & (x < xi)
            x0, y0 = x1, y1
        return res

    return inside


def rect(x0, y0, x1, y1) -> Inside:
    return lambda x, y: (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def rotated_rect(cx, cy, length, width, angle_deg) -> Inside:
    a = math.radians(angle_deg)
    u = np.array([math.cos(a), math.sin(a)]) * length / 2
    w = np.array([-math.sin(a), math.cos(a)]) * width / 2
    c = np.array([cx, cy])
    return polygon(c - u - w, c + u - w, c + u + w, c - u + w)


def disk(cx, cy, r) -> Inside:
    return lambda x, y: (x - cx) ** 2 + (y - cy) ** 2 <= r * r


def ellipse(cx, cy, rx, ry) -> Inside:
    return lambda x, y: ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 <= 1.0


def regular_polygon(cx, cy, r, sides, phase_deg=0.0) -> Inside:
    ang = np.radians(phase_deg) + 2 * np.pi * np.arange(sides) / sides
    return polygon(*zip(cx + r * np.cos(ang), cy + r * np.sin(ang)))


def union(*parts: Inside) -> Inside:
    def inside(x, y):
        res = np.zeros(x.shape, dtype=bool)
        for p in parts:
            res |= p(x, y)
        return res
    return inside


def minus(base: Inside, *holes: Inside) -> Inside:
    def inside(x, y):
        res = base(x, y)
        for h in holes:
            res &= ~h(x, y)
        return res
    return inside


def rasterize(shape: Inside, size: int, supersample: int = 4,
              foreground: int = 255, background: int = 0) -> GrayImage:
    """Area-sampled rendering of `shape` onto a size x size grid."""
    k = supersample
    offs = (np.arange(k) + 0.5) / k
    coords = (np.arange(size)[:, None] + offs[None, :]).ravel() / size
    xx, yy = np.meshgrid(coords, coords)
    cover = shape(xx, yy).reshape(size, k, size, k).mean(axis=(1, 3))
    img = background + (foreground - background) * cover
    return GrayImage(size, size, np.floor(img + 0.5).astype(np.uint8))


# ---------------------------------------------------------------------------
# the fixture set

def triangle() -> Inside:
    return polygon((0.2, 0.78), (0.5, 0.2), (0.82, 0.74))


def wrench() -> Inside:
    handle = rotated_rect(0.45, 0.55, 0.62, 0.1, -35)
    head = disk(0.73, 0.35, 0.13)
    jaw = rotated_rect(0.8, 0.28, 0.2, 0.09, -35)
    ring = disk(0.2, 0.72, 0.09)
    return minus(union(handle, head, ring), jaw, disk(0.2, 0.72, 0.04))


def cup() -> Inside:
    body = polygon((0.25, 0.25), (0.65, 0.25), (0.6, 0.8), (0.3, 0.8))
    handle = minus(ellipse(0.66, 0.5, 0.16, 0.17), ellipse(0.66, 0.5, 0.08, 0.1))
    return union(body, minus(handle, rect(0.3, 0.2, 0.6, 0.85)))


def bolt() -> Inside:
    head = regular_polygon(0.5, 0.22, 0.16, 6, 0)
    shaft = rect(0.42, 0.3, 0.58, 0.85)
    threads = [polygon((x0, y), (x0 + s * 0.05, y + 0.03), (x0, y + 0.06))
               for y in (0.55, 0.7) for x0, s in ((0.42, 1), (0.58, -1))]
    return minus(union(head, shaft), *threads)


def hammer() -> Inside:
    head = polygon((0.2, 0.18), (0.78, 0.18), (0.8, 0.32), (0.2, 0.32), (0.15, 0.25))
    handle = rect(0.45, 0.32, 0.55, 0.88)
    return union(head, handle)


def screwdriver() -> Inside:
    grip = union(rect(0.16, 0.42, 0.44, 0.58), disk(0.16, 0.5, 0.08))
    shaft = rect(0.44, 0.47, 0.78, 0.53)
    tip = polygon((0.78, 0.45), (0.86, 0.49), (0.86, 0.51), (0.78, 0.55))
    return union(grip, shaft, tip)


def key() -> Inside:
    bow = minus(disk(0.25, 0.5, 0.15), disk(0.25, 0.5, 0.06))
    blade = rect(0.38, 0.46, 0.85, 0.54)
    teeth = union(rect(0.62, 0.54, 0.68, 0.64), rect(0.74, 0.54, 0.8, 0.62))
    return union(bow, blade, teeth)


def nut() -> Inside:
    return minus(regular_polygon(0.5, 0.5, 0.33, 6, 30), disk(0.5, 0.5, 0.15))


def bracket() -> Inside:
    plate = polygon((0.2, 0.15), (0.4, 0.15), (0.4, 0.65), (0.82, 0.65), (0.82, 0.85), (0.2, 0.85))
    return minus(plate, disk(0.3, 0.3, 0.05))


def bottle() -> Inside:
    body = rect(0.33, 0.4, 0.67, 0.88)
    shoulder = polygon((0.33, 0.4), (0.44, 0.25), (0.56, 0.25), (0.67, 0.4))
    neck = rect(0.44, 0.12, 0.56, 0.26)
    cap = rect(0.41, 0.08, 0.59, 0.16)
    label = rect(0.31, 0.55, 0.69, 0.72)
    return union(body, shoulder, neck, cap, label)


def spoon() -> Inside:
    bowl = ellipse(0.3, 0.5, 0.17, 0.11)
    handle = polygon((0.45, 0.48), (0.88, 0.46), (0.88, 0.54), (0.45, 0.52))
    return union(bowl, handle)


def pliers() -> Inside:
    left = rotated_rect(0.38, 0.55, 0.62, 0.07, 62)
    right = rotated_rect(0.62, 0.55, 0.62, 0.07, -62)
    pivot = disk(0.5, 0.34, 0.06)
    return union(left, right, pivot)


def saw() -> Inside:
    blade = polygon((0.12, 0.35), (0.75, 0.38), (0.75, 0.6), (0.12, 0.55))
    grip = minus(rect(0.72, 0.3, 0.9, 0.68), rect(0.77, 0.4, 0.85, 0.6))
    return union(blade, grip)


SILHOUETTES: dict[str, Callable[[], Inside]] = {
    "bolt": bolt,
    "bottle": bottle,
    "bracket": bracket,
    "cup": cup,
    "hammer": hammer,
    "key": key,
    "nut": nut,
    "pliers": pliers,
    "saw": saw,
    "screwdriver": screwdriver,
    "spoon": spoon,
    "wrench": wrench,
}
