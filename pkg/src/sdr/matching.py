"""Chamfer matching of dot patterns against a database.

The Chamfer distance used here is the sum of the two directed, weighted
means of squared nearest-neighbour distances. It is symmetric and zero on
identical clouds but not a metric: the triangle inequality can fail.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .generalization import normalize_points

MODES = ("geometry", "density_weighted")


class MatchError(ValueError):
    pass


@dataclass
class WeightedCloud:
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(self.points) == 0:
            raise MatchError("empty point cloud")
        if self.weights is None:
            self.weights = np.ones(len(self.points))
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(self.weights) != len(self.points):
            raise MatchError("one weight per point required")
        if np.any(self.weights < 0) or not np.any(self.weights > 0):
            raise MatchError("weights must be non-negative with at least one positive")

    def normalized(self) -> "WeightedCloud":
        return WeightedCloud(normalize_points(self.points), self.weights.copy())


# ---------------------------------------------------------------------------
# nearest neighbours

def _sqdist(p, q):
    dx = p[..., 0] - q[0]
    dy = p[..., 1] - q[1]
    return dx * dx + dy * dy


def brute_nearest(points: np.ndarray, q) -> tuple[int, float]:
    d2 = _sqdist(np.asarray(points, dtype=np.float64), np.asarray(q, dtype=np.float64))
    i = int(np.argmin(d2))  # first minimum = lowest index
    return i, float(d2[i])


class GridIndex:
    """Uniform-grid spatial hash with exact nearest-neighbour queries.

    Rings of cells around the query are scanned until no unscanned cell can
    hold a closer point. Equidistant candidates resolve to the lowest index,
    matching `brute_nearest`.
    """

    def __init__(self, points):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(self.points) == 0:
            raise MatchError("cannot index an empty point set")
        lo = self.points.min(axis=0)
        span = float(np.ptp(self.points, axis=0).max())
        n = len(self.points)
        self.cell = span / max(1.0, math.sqrt(n)) if span > 0 else 1.0
        self.origin = lo
        cells = np.floor((self.points - lo) / self.cell).astype(np.int64)
        self.cmax = cells.max(axis=0)
        self.buckets = defaultdict(list)
        for i, (cx, cy) in enumerate(cells.tolist()):
            self.buckets[(cx, cy)].append(i)

    def _cell_of(self, q):
        c = np.floor((np.asarray(q) - self.origin) / self.cell).astype(np.int64)
        return int(c[0]), int(c[1])

    def nearest(self, q) -> tuple[int, float]:
        q = np.asarray(q, dtype=np.float64)
        cx, cy = self._cell_of(q)
        # clamp the start so far-away queries begin next to the data
        cx0 = min(max(cx, 0), int(self.cmax[0]))
        cy0 = min(max(cy, 0), int(self.cmax[1]))
        best_i, best_d = -1, math.inf
        r = 0
        rmax = int(max(self.cmax[0], self.cmax[1])) + 1
        while True:
            for gx in range(cx0 - r, cx0 + r + 1):
                for gy in range(cy0 - r, cy0 + r + 1):
                    if max(abs(gx - cx0), abs(gy - cy0)) != r:
                        continue
                    for i in self.buckets.get((gx, gy), ()):
                        d = _sqdist(self.points[i], q)
                        if d < best_d or (d == best_d and i < best_i):
                            best_i, best_d = i, float(d)
            if r >= rmax:
                break
            lo = self.origin + (np.array([cx0, cy0]) - r) * self.cell
            hi = self.origin + (np.array([cx0, cy0]) + r + 1) * self.cell
            gap = min(q[0] - lo[0], hi[0] - q[0], q[1] - lo[1], hi[1] - q[1])
            if best_i >= 0 and gap > 0 and best_d < gap * gap * (1 - 1e-9):
                break
            r += 1
        return best_i, best_d


def nearest_neighbor_index(points) -> GridIndex:
    return GridIndex(points)


# ---------------------------------------------------------------------------
# Chamfer

def _nearest_sq(src: np.ndarray, dst: np.ndarray, use_grid: bool) -> np.ndarray:
    if use_grid:
        index = GridIndex(dst)
        return np.array([index.nearest(p)[1] for p in src])
    return np.array([brute_nearest(dst, p)[1] for p in src])


def _directed(d2: np.ndarray, w: np.ndarray) -> float:
    if np.all(w == w[0]):
        return float(d2.mean())
    return float(np.dot(w, d2) / w.sum())


def chamfer(a, b, use_grid: bool = True) -> float:
    """Symmetric weighted Chamfer distance between two clouds.

    Accepts WeightedCloud instances or bare (n, 2) arrays (unit weights).
    """
    a = a if isinstance(a, WeightedCloud) else WeightedCloud(a)
    b = b if isinstance(b, WeightedCloud) else WeightedCloud(b)
    ab = _nearest_sq(a.points, b.points, use_grid)
    ba = _nearest_sq(b.points, a.points, use_grid)
    return _directed(ab, a.weights) + _directed(ba, b.weights)


def chamfer_brute(a, b) -> float:
    """Reference Chamfer by all-pairs enumeration."""
    a = a if isinstance(a, WeightedCloud) else WeightedCloud(a)
    b = b if isinstance(b, WeightedCloud) else WeightedCloud(b)
    return chamfer(a, b, use_grid=False)


# ---------------------------------------------------------------------------
# ranking

@dataclass
class MatchResult:
    ranking: list  # [(entry_id, distance)], ascending
    mode: str

    @property
    def best(self) -> str:
        return self.ranking[0][0]

    def top(self, k: int) -> "MatchResult":
        return MatchResult(self.ranking[:k], self.mode)

    def to_dict(self) -> dict:
        return {"mode": self.mode,
                "ranking": [{"id": i, "distance": float(f"{d:.12g}")} for i, d in self.ranking]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MatchResult":
        doc = json.loads(text)
        return cls([(r["id"], float(r["distance"])) for r in doc["ranking"]], doc["mode"])


def entry_cloud(entry, mode: str) -> WeightedCloud:
    dens = getattr(entry, "densities", None)
    if mode == "density_weighted" and dens is not None:
        return WeightedCloud(entry.points, dens)
    return WeightedCloud(entry.points)


def match_query(query: WeightedCloud, db, mode: str = "geometry") -> MatchResult:
    """Rank every database entry by Chamfer distance to `query`.

    The query is normalized here; entries are stored normalized. In
    density_weighted mode entries without densities count with unit weights.
    """
    if mode not in MODES:
        raise MatchError(f"unknown match mode {mode!r}")
    entries = list(getattr(db, "entries", db))
    if not entries:
        raise MatchError("database is empty")
    q = query.normalized()
    if mode == "geometry":
        q = WeightedCloud(q.points)
    scores = [(e.id, chamfer(q, entry_cloud(e, mode))) for e in entries]
    scores.sort(key=lambda s: (s[1], s[0]))
    return MatchResult(scores, mode)
