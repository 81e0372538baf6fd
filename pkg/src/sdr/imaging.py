"""Raster loading, Sobel edges and contour tracing."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()

DEFAULT_THRESHOLD = 0.25


class ImageError(ValueError):
    """Raised for unreadable, malformed or undersized images."""


@dataclass(frozen=True)
class GrayImage:
    width: int
    height: int
    data: np.ndarray  # shape (height, width), uint8

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ImageError(f"image too small: {self.width}x{self.height} (need at least 3x3)")
        data = np.asarray(self.data)
        if data.size != self.width * self.height:
            raise ImageError("pixel count does not match width*height")
        object.__setattr__(self, "data", data.reshape(self.height, self.width).astype(np.uint8))


@dataclass(frozen=True)
class EdgeMap:
    width: int
    height: int
    mask: np.ndarray  # shape (height, width), bool

    @property
    def count(self) -> int:
        return int(self.mask.sum())


@dataclass
class Polyline:
    points: list = field(default_factory=list)  # (x, y) pairs
    closed: bool = False

    def __len__(self):
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# loading

def _pnm_tokens(buf: bytes, count: int, pos: int):
    """Read `count` whitespace separated header tokens, skipping comments."""
    tokens = []
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise ImageError("malformed header: truncated")
        if buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(buf[start:pos])
    return tokens, pos


def decode_pgm(buf: bytes) -> GrayImage:
    magic = buf[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageError(f"malformed header: not a PGM file (magic {magic!r})")
    try:
        tokens, pos = _pnm_tokens(buf, 3, 2)
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageError(f"malformed header: {exc}") from None
    if width <= 0 or height <= 0 or not 0 < maxval <= 255:
        raise ImageError(f"malformed header: {width}x{height} maxval {maxval}")
    npix = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates maxval from the raster
        raster = buf[pos + 1 : pos + 1 + npix]
        if len(raster) != npix:
            raise ImageError("truncated raster")
        values = np.frombuffer(raster, dtype=np.uint8).astype(np.int64)
    else:
        text = buf[pos:].split()
        if len(text) < npix:
            raise ImageError("truncated raster")
        try:
            values = np.array([int(v) for v in text[:npix]], dtype=np.int64)
        except ValueError:
            raise ImageError("non-integer sample in ASCII raster") from None
    if values.max(initial=0) > maxval:
        raise ImageError("sample exceeds maxval")
    if maxval != 255:
        values = (values * 255 * 2 + maxval) // (2 * maxval)
    return GrayImage(width, height, values.reshape(height, width))


def luminance(rgb: np.ndarray) -> np.ndarray:
    """0.299 R + 0.587 G + 0.114 B, rounded half up."""
    rgb = np.asarray(rgb, dtype=np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.floor(y + 0.5).clip(0, 255).astype(np.uint8)


def _decode_png(path) -> GrayImage:
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover
        raise ImageError("PNG support needs Pillow (pip install 'sdr[png]')") from None
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise ImageError("malformed header: not a PNG file")
            mode = im.mode
            if mode in ("L", "LA"):
                arr = np.asarray(im.convert("L"))
            elif mode in ("RGB", "RGBA", "P"):
                arr = luminance(np.asarray(im.convert("RGB")))
            else:
                raise ImageError(f"unsupported PNG mode {mode}")
    except ImageError:
        raise
    except Exception as exc:
        raise ImageError(f"unreadable PNG: {exc}") from None
    h, w = arr.shape
    return GrayImage(w, h, arr)


def load_image(path, format: str | None = None) -> GrayImage:
    """Load a PGM (P2/P5) or 8-bit PNG as a luminance image.

    `format` defaults to the file extension.
    """
    path = os.fspath(path)
    if format is None:
        format = os.path.splitext(path)[1].lstrip(".").lower() or "pgm"
    format = format.lower()
    if not os.path.isfile(path):
        raise ImageError(f"no such file: {path}")
    if format == "png":
        return _decode_png(path)
    if format not in ("pgm", "pnm"):
        raise ImageError(f"unsupported format {format!r}")
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_pgm(path, img: GrayImage) -> None:
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.width, img.height))
        fh.write(np.ascontiguousarray(img.data, dtype=np.uint8).tobytes())


# ---------------------------------------------------------------------------
# edges

def sobel_magnitude(img: GrayImage) -> np.ndarray:
    """Euclidean Sobel gradient magnitude; the outer ring of pixels is zero."""
    a = img.data.astype(np.float64)
    h, w = a.shape
    gx = np.zeros((h - 2, w - 2))
    gy = np.zeros((h - 2, w - 2))
    for dy in range(3):
        for dx in range(3):
            win = a[dy : dy + h - 2, dx : dx + w - 2]
            if SOBEL_X[dy, dx]:
                gx += SOBEL_X[dy, dx] * win
            if SOBEL_Y[dy, dx]:
                gy += SOBEL_Y[dy, dx] * win
    mag = np.zeros((h, w))
    mag[1:-1, 1:-1] = np.hypot(gx, gy)
    return mag


def threshold_edges(grad: np.ndarray, threshold: float = DEFAULT_THRESHOLD,
                    relative: bool = True) -> EdgeMap:
    """Binarise a gradient field.

    With ``relative`` the cut is ``threshold * max(grad)`` and threshold must lie
    in (0, 1]; otherwise `threshold` is an absolute magnitude.
    """
    grad = np.asarray(grad, dtype=np.float64)
    h, w = grad.shape
    if relative:
        if not 0 < threshold <= 1:
            raise ValueError(f"relative threshold must be in (0, 1], got {threshold}")
        peak = grad.max(initial=0.0)
        if peak <= 0:
            return EdgeMap(w, h, np.zeros((h, w), dtype=bool))
        cut = threshold * peak
    else:
        if threshold <= 0:
            raise ValueError("absolute threshold must be positive")
        cut = threshold
    mask = grad >= cut
    mask[0, :] = mask[-1, :] = False
    mask[:, 0] = mask[:, -1] = False
    return EdgeMap(w, h, mask)


def thin_edges(edges: EdgeMap) -> EdgeMap:
    """Zhang-Suen thinning down to one-pixel-wide, 8-connected curves.

    Sobel responses to a step are two pixels wide; chaining such bands
    greedily shatters them into many short fragments.
    """
    m = np.pad(np.asarray(edges.mask, dtype=np.uint8), 1)
    while True:
        changed = False
        for step in (0, 1):
            p2 = m[:-2, 1:-1]; p3 = m[:-2, 2:]; p4 = m[1:-1, 2:]; p5 = m[2:, 2:]
            p6 = m[2:, 1:-1]; p7 = m[2:, :-2]; p8 = m[1:-1, :-2]; p9 = m[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = sum(ring[:8])
            a = sum(((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.uint8) for i in range(8))
            if step == 0:
                c1 = p2 * p4 * p6
                c2 = p4 * p6 * p8
            else:
                c1 = p2 * p4 * p8
                c2 = p2 * p6 * p8
            kill = (m[1:-1, 1:-1] == 1) & (b >= 2) & (b <= 6) & (a == 1) & (c1 == 0) & (c2 == 0)
            if kill.any():
                m[1:-1, 1:-1][kill] = 0
                changed = True
        if not changed:
            break
    return EdgeMap(edges.width, edges.height, m[1:-1, 1:-1].astype(bool))


# ---------------------------------------------------------------------------
# tracing

# 4-neighbours first, then diagonals; within each group ascending (dy, dx)
_AXIAL = ((0, -1), (-1, 0), (1, 0), (0, 1))
_DIAGONAL = ((-1, -1), (1, -1), (-1, 1), (1, 1))


def _next_pixel(mask, visited, x, y):
    h, w = mask.shape
    for group in (_AXIAL, _DIAGONAL):
        for dx, dy in group:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] and not visited[ny, nx]:
                return nx, ny
    return None


def _adjacent(p, q) -> bool:
    return max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1


def trace_contours(edges: EdgeMap) -> list[Polyline]:
    """Chain edge pixels into ordered 8-connected polylines.

    Seeds are taken in raster order (smallest y, then x). From the current
    end the walk steps to an unvisited 4-neighbour if one exists, otherwise
    to an unvisited diagonal neighbour; ties go to the smallest (y, x). When
    the forward walk stalls the chain is grown backwards from its seed the
    same way.
    """
    mask = np.asarray(edges.mask, dtype=bool)
    visited = np.zeros_like(mask)
    lines = []
    ys, xs = np.nonzero(mask)  # already in raster order
    for sx, sy in zip(xs.tolist(), ys.tolist()):
        if visited[sy, sx]:
            continue
        visited[sy, sx] = True
        fwd = [(sx, sy)]
        while (nxt := _next_pixel(mask, visited, *fwd[-1])) is not None:
            visited[nxt[1], nxt[0]] = True
            fwd.append(nxt)
        back = []
        cur = (sx, sy)
        while (nxt := _next_pixel(mask, visited, *cur)) is not None:
            visited[nxt[1], nxt[0]] = True
            back.append(nxt)
            cur = nxt
        pts = back[::-1] + fwd
        closed = len(pts) >= 3 and _adjacent(pts[0], pts[-1])
        lines.append(Polyline(pts, closed))
    return lines
