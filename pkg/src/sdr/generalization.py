"""Sparse dot images: equidistant resampling, RDP simplification and an
epsilon search that meets an atom budget."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .imaging import Polyline

DEFAULT_SPACING = 3.0
DEFAULT_BUDGET = 21
MAX_BISECTIONS = 40
BRACKET_TOL = 1e-3
NORMALIZED_SPAN = 0.8


class BudgetError(ValueError):
    """The atom budget cannot be met inside the allowed epsilon range."""

    def __init__(self, budget, minimum, eps_max):
        self.budget = budget
        self.minimum = minimum
        self.eps_max = eps_max
        super().__init__(
            f"budget {budget} unreachable: at most-aggressive epsilon {eps_max:g} px "
            f"the simplification still keeps {minimum} points"
        )


@dataclass
class DotCloud:
    points: np.ndarray  # (n, 2) in [0, 1]
    source_polyline_ids: list = field(default_factory=list)
    epsilon: float = 0.0
    source: str = ""
    width: int = 0
    height: int = 0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if not self.source_polyline_ids:
            self.source_polyline_ids = [0] * len(self.points)

    def __len__(self):
        return len(self.points)

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "source": self.source,
            "epsilon": _sig(self.epsilon, 9),
            "width": int(self.width),
            "height": int(self.height),
            "points": [[_sig(x, 9), _sig(y, 9)] for x, y in self.points],
            "polyline_ids": [int(i) for i in self.source_polyline_ids],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DotCloud":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported dot cloud version {doc.get('version')!r}")
        pts = np.asarray(doc["points"], dtype=np.float64).reshape(-1, 2)
        return cls(pts, list(doc.get("polyline_ids") or []), float(doc["epsilon"]),
                   doc.get("source", ""), int(doc["width"]), int(doc["height"]))


def _sig(x: float, digits: int) -> float:
    return float(f"{float(x):.{digits}g}")


# ---------------------------------------------------------------------------

def resample_equidistant(line: Polyline, spacing: float = DEFAULT_SPACING) -> Polyline:
    """Place dots every `spacing` pixels of arc length along the polyline.

    Closed polylines include the closing segment in the walk. For open ones
    the final vertex is appended when it lies more than spacing/2 past the
    last sample.
    """
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    pts = line.as_array()
    if len(pts) <= 1:
        return Polyline([tuple(map(float, p)) for p in pts], False)
    closed = line.closed and len(pts) >= 3
    path = np.vstack([pts, pts[:1]]) if closed else pts
    seg = np.hypot(*np.diff(path, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total == 0:
        return Polyline([tuple(map(float, pts[0]))], False)
    n = int(math.floor(total / spacing + 1e-9))
    s = spacing * np.arange(n + 1)
    if closed:
        s = s[s < total - 1e-9]
    else:
        s = s[s <= total + 1e-9]
    x = np.interp(s, arc, path[:, 0])
    y = np.interp(s, arc, path[:, 1])
    out = list(zip(x.tolist(), y.tolist()))
    if not closed and total - s[-1] > spacing / 2:
        out.append(tuple(map(float, pts[-1])))
    return Polyline(out, closed and len(out) >= 3)


def segment_distance_sq(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared distance from each row of `p` to the segment ab.

    Inside the span this is cross**2 / |ab|**2, so collinear points give
    exactly zero and equal cross products give equal values.
    """
    p = np.atleast_2d(p)
    ab = b - a
    ap = p - a
    denom = float(ab @ ab)
    end_a = (ap * ap).sum(axis=1)
    if denom == 0.0:
        return end_a
    bp = p - b
    t = ap @ ab
    cross = ab[0] * ap[:, 1] - ab[1] * ap[:, 0]
    return np.where(t <= 0.0, end_a,
                    np.where(t >= denom, (bp * bp).sum(axis=1), cross * cross / denom))


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each row of `p` to the segment ab."""
    return np.sqrt(segment_distance_sq(p, a, b))


def _rdp_open(pts: np.ndarray, epsilon: float, trace=None) -> np.ndarray:
    """Keep-mask of recursive RDP on an open chain (explicit stack)."""
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    eps2 = epsilon * epsilon
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d2 = segment_distance_sq(pts[i + 1 : j], pts[i], pts[j])
        k = int(np.argmax(d2))
        if d2[k] > eps2:
            keep[i + 1 + k] = True
            stack.append((i + 1 + k, j))
            stack.append((i, i + 1 + k))
        elif trace is not None:
            trace.append((i, j, np.sqrt(d2)))
    return keep


def closed_split_points(pts: np.ndarray) -> tuple[int, int]:
    """Split indices for a closed ring: farthest from the centroid, then
    farthest from that point."""
    c = pts.mean(axis=0)
    a = int(np.argmax(np.hypot(*(pts - c).T)))
    b = int(np.argmax(np.hypot(*(pts - pts[a]).T)))
    return a, b


def rdp_simplify(line: Polyline, epsilon: float, trace: list | None = None) -> Polyline:
    """Ramer-Douglas-Peucker simplification.

    Returns a subsequence of the input. `trace`, when given, collects one
    ``(i, j, distances)`` record per dropped span, indices relative to the
    chain being simplified (for closed lines: the ring rotated to start at the
    first split point, closing vertex appended).
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    pts = line.as_array()
    if len(pts) < 3:
        return Polyline(list(line.points), False)
    if not line.closed:
        keep = _rdp_open(pts, epsilon, trace)
        return Polyline([line.points[i] for i in np.flatnonzero(keep)], False)

    a, b = closed_split_points(pts)
    n = len(pts)
    order = np.roll(np.arange(n), -a)
    ring = np.vstack([pts[order], pts[a : a + 1]])
    if b == a:
        return Polyline([line.points[a]], False)
    m = (b - a) % n
    keep = np.zeros(n + 1, dtype=bool)
    keep[: m + 1] = _rdp_open(ring[: m + 1], epsilon, trace)
    sub = []
    keep[m:] |= _rdp_open(ring[m:], epsilon, sub)
    if trace is not None:
        trace.extend((i + m, j + m, d) for i, j, d in sub)
    idx = order[np.flatnonzero(keep[:n])]
    return Polyline([line.points[i] for i in idx], len(idx) >= 3)


def simplified_count(lines, epsilon: float) -> int:
    return sum(len(rdp_simplify(line, epsilon)) for line in lines)


def _cloud_from(lines, epsilon, width, height, source) -> DotCloud:
    side = float(max(width, height))
    pts, ids, seen = [], [], set()
    for k, line in enumerate(lines):
        for x, y in rdp_simplify(line, epsilon).points:
            key = (float(x), float(y))
            if key in seen:
                continue
            seen.add(key)
            pts.append(((x + 0.5) / side, (y + 0.5) / side))
            ids.append(k)
    return DotCloud(np.clip(np.array(pts).reshape(-1, 2), 0.0, 1.0), ids, float(epsilon),
                    source, int(width), int(height))


def simplify_to_budget(lines, budget: int, eps_range=(0.0, 64.0), *, width: int,
                       height: int, source: str = "") -> DotCloud:
    """Smallest RDP epsilon (by bisection) whose total point count fits `budget`.

    Pixel coordinates are mapped to ``(p + 0.5) / max(width, height)`` so the
    aspect ratio survives.
    """
    eps_min, eps_max = map(float, eps_range)
    if budget < 2:
        raise ValueError("budget must be at least 2")
    if not (0 <= eps_min < eps_max):
        raise ValueError(f"bad epsilon range {eps_range}")
    lines = [ln for ln in lines if len(ln)]
    if not lines:
        raise ValueError("no polylines to simplify")
    if simplified_count(lines, eps_min) <= budget:
        return _cloud_from(lines, eps_min, width, height, source)
    worst = simplified_count(lines, eps_max)
    if worst > budget:
        raise BudgetError(budget, worst, eps_max)
    lo, hi = eps_min, eps_max
    for _ in range(MAX_BISECTIONS):
        if hi - lo < BRACKET_TOL:
            break
        mid = 0.5 * (lo + hi)
        if simplified_count(lines, mid) <= budget:
            hi = mid
        else:
            lo = mid
    return _cloud_from(lines, hi, width, height, source)


def normalize_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("cannot normalize an empty cloud")
    centred = pts - pts.mean(axis=0)
    span = float(np.ptp(pts, axis=0).max())
    if span == 0.0:
        return np.full_like(pts, 0.5)
    return 0.5 + centred * (NORMALIZED_SPAN / span)


def normalize_cloud(cloud: DotCloud) -> DotCloud:
    """Centroid to (0.5, 0.5), longer bounding-box side scaled to 0.8."""
    return DotCloud(normalize_points(cloud.points), list(cloud.source_polyline_ids),
                    cloud.epsilon, cloud.source, cloud.width, cloud.height)
