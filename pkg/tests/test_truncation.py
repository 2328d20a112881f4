import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from shapely.geometry import Polygon, box as shapely_box
from shapely import affinity

from plicpos import shapes
from plicpos.polytope import build
from plicpos.truncation import (
    LocalCubic,
    PlaneFrame,
    bracket_index,
    classify_edge,
    classify_vertex,
    edge_length,
    face_area,
    local_cubic,
    precompute,
    truncated_volume,
)

from conftest import SHAPE_NAMES, unit

ORIGIN = np.zeros(3)
SQ3 = math.sqrt(3.0)

normals = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1)
shape_names = st.sampled_from(SHAPE_NAMES)


# --- precompute ------------------------------------------------------------


def test_cube_axis_normal_coefficients(polys):
    co = precompute(polys["cube"], [0, 0, 1], base=ORIGIN)
    np.testing.assert_array_equal(co.brackets, [0.0, 1.0])
    assert sorted(co.sigma.tolist()) == [-1, 0, 0, 0, 0, 1]
    side = co.sigma == 0
    assert np.all(co.C[side] == 0.0)
    np.testing.assert_array_equal(np.abs(co.C[~side]), 1.0)
    assert (co.s_min, co.s_max, co.length) == (0.0, 1.0, 1.0)


def test_cube_diagonal_brackets(polys):
    co = precompute(polys["cube"], [1, 1, 1], base=ORIGIN)
    np.testing.assert_allclose(co.brackets, [0, 1 / SQ3, 2 / SQ3, SQ3], rtol=0, atol=1e-15)


def test_cube_oblique_brackets_match_corner_distances(polys):
    p = polys["cube"]
    n = unit([1, -3, 2])
    co = precompute(p, n, base=ORIGIN)
    # two corners share x - 3y + 2z = 0, so seven distinct values
    expected = np.unique(np.round(p.vertices @ n, 14))
    assert len(co.brackets) == len(expected) == 7
    np.testing.assert_allclose(co.brackets, expected, atol=1e-15)
    assert np.all(np.diff(co.brackets) > 0)


@given(name=shape_names, n=normals)
def test_precompute_invariants(name, n):
    p = shapes.SHAPES[name]()
    co = precompute(p, n)
    assert np.all(np.diff(co.brackets) > 0)
    assert co.brackets[0] == co.s_min and co.brackets[-1] == co.s_max
    assert co.length == pytest.approx(co.s_max - co.s_min, rel=1e-15)
    assert np.all(co.slope >= 0)
    for arr in (co.B, co.C, co.a, co.b, co.slope):
        assert np.all(np.isfinite(arr))
    assert abs(np.linalg.norm(co.normal) - 1.0) <= 1e-14


def test_precompute_rejects_zero_normal(polys):
    with pytest.raises(ValueError):
        precompute(polys["cube"], [0, 0, 0])


def test_default_base_is_vertex_centroid(polys):
    co = precompute(polys["tetra"], [0, 0, 1])
    np.testing.assert_allclose(co.base, [0.25, 0.25, 0.25])
    assert co.s_min == pytest.approx(-0.25) and co.s_max == pytest.approx(0.75)


# --- classification ----------------------------------------------------------


def test_classify_vertex():
    frame = PlaneFrame(np.array([0.0, 0.0, 1.0]), ORIGIN, 0.0)
    assert classify_vertex([0, 0, 5e-15], frame) == 0
    assert classify_vertex([0, 0, -0.3], frame) == -1
    assert classify_vertex([0, 0, 1e-14], frame) == 1
    assert classify_vertex([0, 0, -1e-14], frame) == -1
    assert classify_vertex([0, 0, 0.7], PlaneFrame(frame.normal, ORIGIN, 0.7)) == 0


EDGE_TABLE = {
    (1, 1): 1, (-1, -1): -1, (-1, 1): 0, (1, -1): 0,
    (0, 1): 2, (1, 0): 2, (0, -1): -2, (-1, 0): -2, (0, 0): 3,
}


@pytest.mark.parametrize("pair, code", EDGE_TABLE.items())
def test_classify_edge_table(pair, code):
    assert classify_edge(*pair) == code


def test_classify_edge_rejects_bad_status():
    with pytest.raises(ValueError):
        classify_edge(2, 0)


# --- edge lengths ------------------------------------------------------------


def _find_edge(p, a, b):
    for k, f in enumerate(p.faces):
        for m in range(len(f)):
            if (f[m], f[(m + 1) % len(f)]) == (a, b):
                return k, m
    raise LookupError


def test_edge_length_fully_interior(polys):
    p = polys["cube"]
    co = precompute(p, [0, 0, 1], base=ORIGIN)
    k, m = _find_edge(p, 0, 1)
    assert edge_length(k, m, 0.5, co) == (1.0, 0.0)


def test_edge_length_vertical_cut(polys):
    p = polys["cube"]
    co = precompute(p, [0, 0, 1], base=ORIGIN)
    for a, b in ((0, 4), (4, 0)):
        k, m = _find_edge(p, a, b)
        l, lp = edge_length(k, m, 0.3, co)
        assert l == pytest.approx(0.3, abs=1e-15) and lp == pytest.approx(1.0, abs=1e-15)


def test_edge_length_diagonal():
    verts = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 0, 1)]
    p = build(verts, [(0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)])
    co = precompute(p, [1, 0, 0], base=ORIGIN)
    k, m = _find_edge(p, 0, 2)
    l, lp = edge_length(k, m, 0.25, co)
    assert l == pytest.approx(0.25 * math.sqrt(2), rel=1e-15)
    assert lp == pytest.approx(math.sqrt(2), rel=1e-15)


def test_edge_length_status_conventions(polys):
    p = polys["cube"]
    co = precompute(p, [0, 0, 1], base=ORIGIN)
    k, m = _find_edge(p, 0, 4)
    assert edge_length(k, m, 0.0, co)[0] == 0.0  # vertex 0 on plane, 4 outside: status 2
    l, lp = edge_length(k, m, 1.0, co)  # 4 on plane, 0 inside: status -2
    assert (l, lp) == (1.0, 1.0)
    k, m = _find_edge(p, 0, 1)
    assert edge_length(k, m, 0.0, co) == (0.0, 0.0)  # both on plane: status 3


def test_edge_length_bad_index(polys):
    co = precompute(polys["cube"], [0, 0, 1])
    with pytest.raises(IndexError):
        edge_length(0, 4, 0.0, co)


# --- face areas --------------------------------------------------------------


def test_side_face_area(polys):
    p = polys["cube"]
    co = precompute(p, [0, 0, 1], base=ORIGIN)
    k = p.faces.index((0, 4, 7, 3))  # x = 0
    A, A1, A2 = face_area(k, 0.3, co)
    assert A == pytest.approx(0.3, abs=1e-15)
    assert (A1, A2) == (pytest.approx(1.0, abs=1e-15), pytest.approx(0.0, abs=1e-15))


def test_parallel_face_left_limit(polys):
    p = polys["cube"]
    co = precompute(p, [0, 0, 1], base=ORIGIN)
    bottom, top = p.faces.index((0, 3, 2, 1)), p.faces.index((4, 5, 6, 7))
    assert face_area(bottom, 0.0, co) == (0.0, 0.0, 0.0)
    assert face_area(bottom, 1e-3, co) == (1.0, 0.0, 0.0)
    assert face_area(top, 1.0, co) == (0.0, 0.0, 0.0)
    assert face_area(top, 1.0 + 1e-3, co) == (1.0, 0.0, 0.0)


@pytest.mark.parametrize("name", SHAPE_NAMES)
def test_faces_empty_below_s_min(polys, name):
    p = polys[name]
    co = precompute(p, [0.2, 0.7, -0.4])
    for k in range(p.n_faces):
        assert face_area(k, co.s_min - 0.1, co) == (0.0, 0.0, 0.0)
        assert face_area(k, co.s_max + 0.1, co)[0] == pytest.approx(p.geometry.face_area[k], rel=1e-12)


PENTAGON = [(1, 3), (7, 1), (11, 7), (5, 5), (3, 9)]


@pytest.fixture(scope="module")
def pentagon_prism():
    poly = Polygon(PENTAGON)
    ring = PENTAGON if poly.exterior.is_ccw else PENTAGON[::-1]
    n = len(ring)
    verts = [(x, y, 0.0) for x, y in ring] + [(x, y, 1.0) for x, y in ring]
    faces = [tuple(range(n))[::-1], tuple(range(n, 2 * n))]
    faces += [(m, (m + 1) % n, (m + 1) % n + n, m + n) for m in range(n)]
    return build(verts, faces), poly


def _clipped_area(poly, n2, base, s):
    # half-plane {x : <x - base, n> <= s} as a large rotated box
    big = 1e3
    half = shapely_box(-big, -big, s, big)
    ang = math.degrees(math.atan2(n2[1], n2[0]))
    half = affinity.rotate(half, ang, origin=(0, 0))
    half = affinity.translate(half, base[0], base[1])
    return poly.intersection(half).area


def test_pentagon_area_against_polygon_clipping(pentagon_prism):
    p, poly = pentagon_prism
    n = unit([4, 6, 0])
    base = np.array([1.0, 3.0, 0.0])
    co = precompute(p, n, base=base)
    top = 1
    assert co.s_min == 0.0 and co.s_max == pytest.approx(64 / math.sqrt(52))
    for s in np.linspace(co.s_min - 0.5, co.s_max + 0.5, 401):
        A = face_area(top, s, co)[0]
        assert A == pytest.approx(_clipped_area(poly, n, base, s), abs=1e-11 * poly.area)


def test_pentagon_second_derivative_jumps(pentagon_prism):
    p, _ = pentagon_prism
    n = unit([4, 6, 0])
    co = precompute(p, n, base=np.array([1.0, 3.0, 0.0]))
    nodes = np.array([0, 12, 28, 44, 64]) / math.sqrt(52)
    np.testing.assert_allclose(co.brackets, nodes, atol=1e-14)
    second = []
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        vals = [face_area(1, s, co)[2] for s in np.linspace(lo, hi, 9)[1:-1]]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-10, atol=1e-12)
        second.append(vals[0])
    # jumps at the three interior vertices
    assert all(abs(a - b) > 1e-3 for a, b in zip(second[:-1], second[1:]))
    # area continuous across every node
    for s in nodes:
        a_left = face_area(1, s - 1e-9, co)[0]
        a_right = face_area(1, s + 1e-9, co)[0]
        assert abs(a_left - a_right) < 1e-7


# --- volume ------------------------------------------------------------------


def test_volume_cube_axis(polys):
    vs = truncated_volume(precompute(polys["cube"], [0, 0, 1], base=ORIGIN), 0.27)
    assert vs.V == pytest.approx(0.27, abs=1e-15)
    assert vs.dV == pytest.approx(1.0, abs=1e-15)
    assert abs(vs.d2V) <= 1e-14 and abs(vs.d3V) <= 1e-14


def test_volume_cube_corner(polys):
    vs = truncated_volume(precompute(polys["cube"], [1, 1, 1], base=ORIGIN), 0.4)
    assert vs.V == pytest.approx(SQ3 / 2 * 0.4**3, rel=1e-14)
    assert vs.V == pytest.approx(0.0554256258422, rel=1e-11)
    assert vs.d3V == pytest.approx(3 * SQ3, rel=1e-13)
    assert vs.bracket == 0


def test_volume_tetra(polys):
    vs = truncated_volume(precompute(polys["tetra"], [0, 0, 1], base=ORIGIN), 0.5)
    assert vs.V == pytest.approx((1 - 0.5**3) / 6, rel=1e-14)
    assert vs.V == pytest.approx(0.1458333333333, rel=1e-12)


@pytest.mark.parametrize("name", SHAPE_NAMES)
def test_volume_clamped_outside_range(polys, name):
    p = polys[name]
    co = precompute(p, [0.6, -0.2, 0.3])
    assert truncated_volume(co, co.s_min).V == 0.0
    assert truncated_volume(co, co.s_min - 5).V == 0.0
    assert truncated_volume(co, co.s_max + 5).V == pytest.approx(p.volume, rel=1e-12)
    assert truncated_volume(co, co.s_max).V == pytest.approx(p.volume, rel=1e-12)


def test_bracket_index(polys):
    co = precompute(polys["cube"], [1, 1, 1], base=ORIGIN)
    assert bracket_index(co, 0.1) == 0
    assert bracket_index(co, 0.7) == 1
    assert bracket_index(co, 1.6) == 2


# --- local cubic ---------------------------------------------------------------


def test_local_cubic_linear(polys):
    co = precompute(polys["cube"], [0, 0, 1], base=ORIGIN)
    c = local_cubic(truncated_volume(co, 0.4))
    for z in (0.0, 0.13, 0.77, 1.0):
        assert c(z) == pytest.approx(0.4 + (z - 0.4), abs=1e-15)


def test_local_cubic_corner(polys):
    co = precompute(polys["cube"], [1, 1, 1], base=ORIGIN)
    vs = truncated_volume(co, 0.3)
    c = local_cubic(vs)
    assert c(0.3) == vs.V
    for z in np.linspace(0, 1 / SQ3, 11):
        assert c(z) == pytest.approx(SQ3 / 2 * z**3, abs=1e-15)
    # expanded about zero, the cubic is (sqrt 3 / 2) z^3
    t = -c.center
    coeffs = [
        c.c0 + c.c1 * t + c.c2 * t**2 + c.c3 * t**3,
        c.c1 + 2 * c.c2 * t + 3 * c.c3 * t**2,
        c.c2 + 3 * c.c3 * t,
        c.c3,
    ]
    np.testing.assert_allclose(coeffs, [0, 0, 0, SQ3 / 2], atol=1e-14)


def test_local_cubic_derivative():
    c = LocalCubic(1.0, 2.0, 3.0, 4.0, 5.0)
    assert c.derivative(1.0) == 3.0
    assert c.derivative(2.0) == pytest.approx(3 + 8 + 15)


# --- properties ---------------------------------------------------------------


@given(name=shape_names, n=normals, u=st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_monotone(name, n, u):
    p = shapes.SHAPES[name]()
    co = precompute(p, n)
    s1, s2 = sorted(co.s_min + co.length * np.array(u))
    a, b = truncated_volume(co, s1), truncated_volume(co, s2)
    assert a.V <= b.V + 1e-15 * p.volume
    assert a.dV >= 0 and b.dV >= 0


def test_monotone_many_pairs(polys):
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p = polys[SHAPE_NAMES[rng.integers(len(SHAPE_NAMES))]]
        co = precompute(p, rng.normal(size=3))
        s = np.sort(rng.uniform(co.s_min, co.s_max, 8))
        v = [truncated_volume(co, x).V for x in s]
        assert np.all(np.diff(v) >= -1e-15 * p.volume)


def _interior_points(co, i, k, rng):
    lo, hi = co.brackets[i], co.brackets[i + 1]
    pad = 1e-6 * (hi - lo)
    return rng.uniform(lo + pad, hi - pad, k)


@given(name=shape_names, n=normals, seed=st.integers(0, 2**31))
def test_cubic_in_bracket(name, n, seed):
    p = shapes.SHAPES[name]()
    co = precompute(p, n)
    rng = np.random.default_rng(seed)
    i = int(rng.integers(len(co.brackets) - 1))
    assume(co.brackets[i + 1] - co.brackets[i] > 1e-6 * co.length)
    pts = _interior_points(co, i, 5, rng)
    vols = np.array([truncated_volume(co, s).V for s in pts])
    c = local_cubic(truncated_volume(co, pts[0]))
    np.testing.assert_allclose(c(pts[1:]), vols[1:], rtol=0, atol=1e-10 * p.volume)
    # interpolating cubic through four samples predicts the fifth
    fit = np.polynomial.Polynomial.fit(pts[:4], vols[:4], 3)
    assert fit(pts[4]) == pytest.approx(vols[4], abs=1e-10 * p.volume)


@given(name=shape_names, n=normals, u=st.floats(0, 1))
def test_complement_symmetry(name, n, u):
    p = shapes.SHAPES[name]()
    co = precompute(p, n)
    neg = precompute(p, -np.asarray(n))
    s = co.s_min + u * co.length
    total = truncated_volume(co, s).V + truncated_volume(neg, -s).V
    assert total == pytest.approx(p.volume, abs=1e-12 * p.volume)


@given(name=shape_names, n=normals)
def test_boundary_derivatives_vanish(name, n):
    p = shapes.SHAPES[name]()
    co = precompute(p, n)
    # general position: no face aligned with the normal and no edge nearly
    # perpendicular to it (a sliver bracket makes the edge slopes blow up)
    assume(np.abs(p.geometry.face_normal @ co.normal).max() < 1 - 1e-6)
    assume(np.diff(co.brackets).min() > 1e-6 * co.length)
    scale = p.volume / co.length
    assert abs(truncated_volume(co, co.s_min).dV) <= 1e-10 * scale
    assert abs(truncated_volume(co, co.s_max).dV) <= 1e-10 * scale


@pytest.mark.parametrize("name", SHAPE_NAMES)
def test_finite_difference_derivatives(polys, name):
    p = polys[name]
    rng = np.random.default_rng(11)
    for _ in range(20):
        co = precompute(p, rng.normal(size=3))
        L = co.length
        h = 1e-6 * L
        s = rng.uniform(co.s_min, co.s_max)
        if np.abs(co.brackets - s).min() <= 1e-5 * L:
            continue
        m, c, pl = (truncated_volume(co, x) for x in (s - h, s, s + h))
        assert (pl.V - m.V) / (2 * h) == pytest.approx(c.dV, abs=1e-6 * p.volume / L)
        scale = max(abs(c.d2V), p.volume / L**2)
        assert abs((pl.dV - m.dV) / (2 * h) - c.d2V) <= 1e-4 * scale
        assert abs((pl.d2V - m.d2V) / (2 * h) - c.d3V) <= 1e-4 * max(abs(c.d3V), p.volume / L**3)


@given(n=normals, u=st.floats(0, 1), name=st.sampled_from(("cube", "tetra", "dodeca")))
def test_matches_clip_oracle(n, u, name):
    from plicpos.oracle import clip_convex_volume

    p = shapes.SHAPES[name]()
    co = precompute(p, n)
    s = co.s_min + u * co.length
    ref = clip_convex_volume(p, PlaneFrame(co.normal, co.base, s))
    assert truncated_volume(co, s).V == pytest.approx(ref, abs=1e-10 * p.volume)


def test_coefficients_do_not_depend_on_s(polys):
    co = precompute(polys["dodeca"], [0.1, 0.2, 0.9])
    snapshot = [a.copy() for a in (co.B, co.C, co.a, co.b, co.slope, co.brackets)]
    for s in np.linspace(co.s_min, co.s_max, 17):
        truncated_volume(co, s)
    for a, b in zip(snapshot, (co.B, co.C, co.a, co.b, co.slope, co.brackets)):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("delta", [1e-15, 1e-13, 1e-11, 1e-9, 1e-7, 1e-5])
@pytest.mark.parametrize("name", ["cube", "tetra", "dodeca"])
def test_nearly_parallel_faces_match_clip_oracle(polys, name, delta):
    from plicpos.oracle import clip_convex_volume

    p = polys[name]
    rng = np.random.default_rng(5)
    for k in range(p.n_faces):
        n = unit(p.geometry.face_normal[k] + delta * unit(rng.normal(size=3)))
        co = precompute(p, n)
        for s in np.concatenate([co.brackets, co.s_min + co.length * rng.random(5)]):
            ref = clip_convex_volume(p, PlaneFrame(co.normal, co.base, s))
            assert truncated_volume(co, s).V == pytest.approx(ref, abs=1e-10 * p.volume)
