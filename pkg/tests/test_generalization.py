import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import rdp_oracle
from sdr.generalization import (BudgetError, DotCloud, closed_split_points, normalize_cloud,
                                normalize_points, point_segment_distance, rdp_simplify,
                                resample_equidistant, simplified_count, simplify_to_budget)
from sdr.imaging import Polyline

OCTAGON = [(1, 0), (2, 0), (3, 1), (3, 2), (2, 3), (1, 3), (0, 2), (0, 1)]

coords = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
open_lines = st.lists(st.tuples(coords, coords), min_size=2, max_size=40)
epsilons = st.floats(0, 50, allow_nan=False)


def arc_positions(line, pts):
    """Arc length of each output point along `line` (unambiguous for monotone paths)."""
    path = line.as_array()
    if line.closed:
        path = np.vstack([path, path[:1]])
    seg_len = np.hypot(*np.diff(path, axis=0).T)
    arc = np.concatenate([[0], np.cumsum(seg_len)])
    out = []
    for p in np.asarray(pts):
        best = min(range(len(path) - 1),
                   key=lambda i: point_segment_distance(p, path[i], path[i + 1])[0])
        out.append(arc[best] + np.hypot(*(p - path[best])))
    return out


# -- resampling ------------------------------------------------------------

def test_resample_segment():
    out = resample_equidistant(Polyline([(0, 0), (10, 0)]), 2)
    assert out.points == [(float(x), 0.0) for x in range(0, 11, 2)]


def test_resample_single_point():
    assert resample_equidistant(Polyline([(4, 5)]), 3).points == [(4.0, 5.0)]


def test_resample_octagon():
    line = Polyline(OCTAGON, True)
    out = resample_equidistant(line, 3)
    assert len(out) == 4 and out.points[0] == (1.0, 0.0)
    assert np.allclose(arc_positions(line, out.points), [0, 3, 6, 9])


def test_resample_appends_far_endpoint():
    assert resample_equidistant(Polyline([(0, 0), (8, 0)]), 3).points[-1] == (8.0, 0.0)
    assert resample_equidistant(Polyline([(0, 0), (7.4, 0)]), 3).points[-1] == (6.0, 0.0)


def test_resample_bad_spacing():
    with pytest.raises(ValueError):
        resample_equidistant(Polyline([(0, 0), (1, 0)]), 0)


@given(st.lists(st.sampled_from([(1, 0), (0, 1), (1, 1)]),
                min_size=1, max_size=30),
       st.floats(0.5, 6))
def test_resample_spacing_along_curve(steps, spacing):
    pts = [(0, 0)]
    for dx, dy in steps:
        pts.append((pts[-1][0] + dx, pts[-1][1] + dy))
    line = Polyline(pts, False)
    out = resample_equidistant(line, spacing)
    assert out.points[0] == (0.0, 0.0)
    s = arc_positions(line, out.points)
    assert all(b - a <= spacing + 1e-9 for a, b in zip(s, s[1:]))


# -- RDP -------------------------------------------------------------------

def test_rdp_collinear():
    assert rdp_simplify(Polyline([(0, 0), (1, 0), (2, 0)]), 0.1).points == [(0, 0), (2, 0)]


def test_rdp_peak_kept():
    assert len(rdp_simplify(Polyline([(0, 0), (1, 1), (2, 0)]), 0.5)) == 3


def test_rdp_peak_dropped():
    assert rdp_simplify(Polyline([(0, 0), (1, 1), (2, 0)]), 1.5).points == [(0, 0), (2, 0)]


def test_rdp_negative_eps():
    with pytest.raises(ValueError):
        rdp_simplify(Polyline([(0, 0), (1, 0)]), -1)


def test_rdp_collinear_dropped_at_zero_epsilon():
    pts = [(23.928407809085712, 0.0), (2.0, 0.0), (0.0, 0.0)]
    assert rdp_simplify(Polyline(pts), 0.0).points == [pts[0], pts[2]]


def test_rdp_distance_equal_to_epsilon_dropped():
    # (2, 1) sits exactly 1 from the baseline; only strictly farther points stay
    pts = [(0.0, 0.0), (2.0, 1.0), (4.0, 0.0)]
    assert rdp_simplify(Polyline(pts), 1.0).points == [pts[0], pts[2]]
    assert rdp_oracle(pts, 1.0) == [0, 2]


@given(open_lines, epsilons)
def test_rdp_matches_oracle(pts, eps):
    out = rdp_simplify(Polyline(pts), eps)
    assert out.points == [pts[i] for i in rdp_oracle(pts, eps)]


@given(open_lines, epsilons)
def test_rdp_subsequence_with_endpoints(pts, eps):
    out = rdp_simplify(Polyline(pts), eps).points
    assert out[0] == pts[0] and out[-1] == pts[-1]
    it = iter(pts)
    assert all(p in it for p in out)


@given(open_lines, epsilons, epsilons)
def test_rdp_monotone(pts, e1, e2):
    lo, hi = sorted((e1, e2))
    line = Polyline(pts)
    assert len(rdp_simplify(line, hi)) <= len(rdp_simplify(line, lo))


@given(open_lines, epsilons)
def test_rdp_dropped_within_eps(pts, eps):
    trace = []
    rdp_simplify(Polyline(pts), eps, trace)
    arr = np.asarray(pts, dtype=float)
    dropped = set()
    for i, j, d in trace:
        assert np.all(d <= eps)
        assert np.allclose(d, point_segment_distance(arr[i + 1:j], arr[i], arr[j]))
        dropped.update(range(i + 1, j))
    kept = len(rdp_simplify(Polyline(pts), eps))
    assert len(dropped) == len(pts) - kept


def test_rdp_closed_ring():
    t = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    pts = [(10 * math.cos(a), 6 * math.sin(a)) for a in t]
    line = Polyline(pts, True)
    a, b = closed_split_points(line.as_array())
    out = rdp_simplify(line, 0.5)
    assert out.closed and pts[a] in out.points and pts[b] in out.points
    # both halves agree with the open-chain oracle
    ring = pts[a:] + pts[:a] + [pts[a]]
    m = (b - a) % len(pts)
    keep = {i for i in rdp_oracle(ring[: m + 1], 0.5)}
    keep |= {i + m for i in rdp_oracle(ring[m:], 0.5)}
    expect = [ring[i] for i in sorted(keep) if i < len(pts)]
    assert out.points == expect


# -- budget search ---------------------------------------------------------

def noisy_circle(n=100, seed=3):
    r = np.random.default_rng(seed)
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    rad = 40 + r.normal(0, 1.5, n)
    return Polyline(list(zip(50 + rad * np.cos(t), 50 + rad * np.sin(t))), True)


def test_budget_passthrough():
    line = Polyline([(0, 0), (5, 5), (10, 0)])
    cloud = simplify_to_budget([line], 21, (0.5, 10), width=11, height=11)
    assert cloud.epsilon == 0.5 and len(cloud) == 3


def test_budget_noisy_circle():
    line = noisy_circle()
    cloud = simplify_to_budget([line], 12, (0, 64), width=100, height=100)
    assert len(cloud) <= 12
    assert len(rdp_simplify(line, cloud.epsilon)) <= 12
    assert len(rdp_simplify(line, cloud.epsilon / 2)) > 12


def test_budget_unreachable():
    zigzag = Polyline([(i, 10 * (i % 2)) for i in range(50)])
    assert len(rdp_simplify(zigzag, 1.0)) > 2
    with pytest.raises(BudgetError) as err:
        simplify_to_budget([zigzag], 2, (0, 1.0), width=50, height=50)
    assert err.value.minimum == len(rdp_simplify(zigzag, 1.0))


@given(st.lists(open_lines, min_size=1, max_size=4), st.integers(2, 30))
def test_budget_never_exceeded(lines, budget):
    lines = [Polyline([(x + 100, y + 100) for x, y in ln]) for ln in lines]
    try:
        cloud = simplify_to_budget(lines, budget, (0, 400), width=200, height=200)
    except BudgetError:
        assert simplified_count(lines, 400) > budget
        return
    assert 1 <= len(cloud) <= budget
    assert np.all((cloud.points >= 0) & (cloud.points <= 1))
    assert len({tuple(p) for p in cloud.points}) == len(cloud)


def test_budget_aspect_preserved():
    line = Polyline([(0, 0), (99, 0), (99, 49)])
    cloud = simplify_to_budget([line], 5, (0, 1), width=100, height=50)
    assert np.allclose(cloud.points, [[0.005, 0.005], [0.995, 0.005], [0.995, 0.495]])


# -- normalization ---------------------------------------------------------

def test_normalize_single():
    assert normalize_points([(0, 0)]).tolist() == [[0.5, 0.5]]


def test_normalize_pair():
    assert np.allclose(normalize_points([(0, 0), (1, 0)]), [[0.1, 0.5], [0.9, 0.5]])


@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=30))
def test_normalize_idempotent(pts):
    once = normalize_points(pts)
    assert np.allclose(normalize_points(once), once, atol=1e-12, rtol=0)


def test_cloud_json_roundtrip(rng):
    c = DotCloud(rng.random((7, 2)), [0, 0, 1, 1, 2, 2, 2], 3.25, "x.pgm", 64, 48)
    back = DotCloud.from_json(c.to_json())
    assert np.allclose(back.points, c.points, rtol=1e-8, atol=0)
    assert (back.epsilon, back.source, back.width, back.height) == (3.25, "x.pgm", 64, 48)
    assert back.source_polyline_ids == c.source_polyline_ids
    assert DotCloud.from_json(back.to_json()).to_json() == back.to_json()


def test_normalize_cloud_keeps_meta():
    c = normalize_cloud(DotCloud(np.array([[0.1, 0.1], [0.3, 0.2]]), [4, 5], 2.0, "s", 10, 10))
    assert c.source_polyline_ids == [4, 5] and c.epsilon == 2.0
