"""
Truncated volume of a polyhedron below the plane <x - x_b, n> = s.

Volume and its first three derivatives with respect to ``s`` come from one
pass over the faces with an inner loop over each face's own edges. Edges are
never identified across faces. All coefficients that do not depend on ``s``
are prepared once per (polyhedron, normal) pair by :func:`precompute`.

Status codes follow the usual convention for vertices (-1 interior,
0 on the plane, 1 exterior) and extend it for edges with the degenerate
codes 2 (touching, exterior), -2 (touching, interior) and 3 (in the plane).
Degenerate configurations are continued by their left-sided limit.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .polytope import Geometry, Polyhedron

ZERO_TOL = 1e-14
PARALLEL_TOL = 1e-12


class StaticCoefficients(NamedTuple):
    """Plane-position independent data for one (polyhedron, normal) pair.

    Treat as read-only; it is shared between concurrent evaluations.
    """

    geometry: Geometry
    normal: np.ndarray
    base: np.ndarray
    dist: np.ndarray  # signed distance of every vertex
    B: np.ndarray  # per face: <x_k1 - x_b, n_F>
    C: np.ndarray  # per face: -<n_F, n>
    sigma: np.ndarray  # per face: +-1 if parallel to the plane, else 0
    face_dmin: np.ndarray
    face_dmax: np.ndarray
    a: np.ndarray  # per half-edge area coefficients
    b: np.ndarray
    slope: np.ndarray  # per half-edge length slope, dl/ds while cut
    brackets: np.ndarray  # sorted unique vertex distances
    s_min: float
    s_max: float
    length: float
    volume: float
    eps0: float


@dataclass(frozen=True)
class PlaneFrame:
    normal: np.ndarray
    base: np.ndarray
    s: float = 0.0

    def level(self, x):
        """Signed distance of point(s) ``x`` to the plane."""
        return np.asarray(x) @ self.normal - self.base @ self.normal - self.s


@dataclass(frozen=True)
class VolumeSample:
    s: float
    V: float
    dV: float
    d2V: float
    d3V: float
    bracket: int


@dataclass(frozen=True)
class LocalCubic:
    """Cubic ``c0 + c1 (z-center) + c2 (z-center)**2 + c3 (z-center)**3``."""

    center: float
    c0: float
    c1: float
    c2: float
    c3: float

    def __call__(self, z):
        t = np.asarray(z, dtype=float) - self.center
        return ((self.c3 * t + self.c2) * t + self.c1) * t + self.c0

    def derivative(self, z):
        t = np.asarray(z, dtype=float) - self.center
        return (3.0 * self.c3 * t + 2.0 * self.c2) * t + self.c1


@njit(cache=True, _nrt=False)
def _vertex_status(lam, eps0):
    if abs(lam) < eps0:
        return 0
    return 1 if lam > 0.0 else -1


@njit(cache=True, _nrt=False)
def _edge_status(si, sj):
    if si == sj:
        return 3 if si == 0 else si
    if si == 0 or sj == 0:
        return 2 if si + sj > 0 else -2
    return 0


@njit(cache=True, _nrt=False)
def _edge_length(status, di, dj, s, length, slope):
    if status == -1:
        return length, 0.0
    if status == -2:
        return length, slope
    if status == 0:
        return (s - min(di, dj)) * slope, slope
    return 0.0, 0.0


@njit(cache=True)
def _workspace(geo):
    """Scratch arrays for :func:`_fill`, reusable across normals."""
    nv = geo.verts.shape[0]
    nf = geo.face_ptr.shape[0] - 1
    nh = geo.face_idx.shape[0]
    return (np.empty(nv), np.empty(nf), np.empty(nf), np.zeros(nf, dtype=np.int64),
            np.empty(nf), np.empty(nf), np.zeros(nh), np.zeros(nh), np.zeros(nh),
            np.empty(nv))


@njit(cache=True, _nrt=False)
def _sift_down(x, root, end):
    while True:
        child = 2 * root + 1
        if child >= end:
            return
        if child + 1 < end and x[child + 1] > x[child]:
            child += 1
        if x[root] >= x[child]:
            return
        x[root], x[child] = x[child], x[root]
        root = child


@njit(cache=True, _nrt=False)
def _sorted_unique(dist, out, dedup_tol):
    """Sort ``dist`` into ``out`` and drop near duplicates; returns the count.

    Insertion sort for small inputs, in-place heapsort otherwise; neither
    allocates, so the kernel can run without the numba runtime.
    """
    n = dist.shape[0]
    if n <= 64:
        for v in range(n):
            x = dist[v]
            j = v
            while j > 0 and out[j - 1] > x:
                out[j] = out[j - 1]
                j -= 1
            out[j] = x
    else:
        for v in range(n):
            out[v] = dist[v]
        for root in range(n // 2 - 1, -1, -1):
            _sift_down(out, root, n)
        for end in range(n - 1, 0, -1):
            out[0], out[end] = out[end], out[0]
            _sift_down(out, 0, end)
    s_max = out[n - 1]
    m = 1
    for v in range(1, n):
        if out[v] - out[m - 1] >= dedup_tol:
            out[m] = out[v]
            m += 1
    # the last unique bound absorbs the true maximum
    out[m - 1] = s_max
    return m


@njit(cache=True, _nrt=False)
def _fill(geo, normal, base, eps0, par_tol, dedup_tol, ws):
    dist, B, C, sigma, face_dmin, face_dmax, a, b, slope, srt = ws
    verts = geo.verts
    nv = verts.shape[0]
    nf = geo.face_ptr.shape[0] - 1
    n0, n1, n2 = normal[0], normal[1], normal[2]
    b0, b1, b2 = base[0], base[1], base[2]

    for v in range(nv):
        dist[v] = (verts[v, 0] - b0) * n0 + (verts[v, 1] - b1) * n1 + (verts[v, 2] - b2) * n2

    fn = geo.face_normal
    cn = geo.conormal
    for k in range(nf):
        lo = geo.face_ptr[k]
        hi = geo.face_ptr[k + 1]
        f0, f1, f2 = fn[k, 0], fn[k, 1], fn[k, 2]
        v1 = geo.face_idx[lo]
        Bk = (verts[v1, 0] - b0) * f0 + (verts[v1, 1] - b1) * f1 + (verts[v1, 2] - b2) * f2
        c = f0 * n0 + f1 * n1 + f2 * n2
        B[k] = Bk
        C[k] = -c
        # |n_F x n|^2 is the accurate form of 1 - c^2 for nearly parallel faces
        cx = f1 * n2 - f2 * n1
        cy = f2 * n0 - f0 * n2
        cz = f0 * n1 - f1 * n0
        q = cx * cx + cy * cy + cz * cz

        dmin = np.inf
        dmax = -np.inf
        for j in range(lo, hi):
            d0 = dist[geo.face_idx[j]]
            dmin = min(dmin, d0)
            dmax = max(dmax, d0)
        # a nearly parallel face whose vertices still span distinct levels
        # keeps the general formula: its lever arm B + sC vanishes with the
        # misalignment, so the large a/b terms stay harmless in V
        parallel = q == 0.0 or (abs(c) >= 1.0 - par_tol and dmax - dmin <= dedup_tol)
        inv_q = 0.0 if parallel else 1.0 / q
        sigma[k] = (1 if c > 0.0 else -1) if parallel else 0

        for j in range(lo, hi):
            i0 = geo.face_idx[j]
            d0 = dist[i0]
            dd = abs(dist[geo.face_next[j]] - d0)
            slope[j] = geo.edge_len[j] / dd if dd >= eps0 else 0.0
            if parallel:
                a[j] = 0.0
                b[j] = 0.0
            else:
                Nn = cn[j, 0] * n0 + cn[j, 1] * n1 + cn[j, 2] * n2
                a[j] = (
                    (verts[i0, 0] - b0) * cn[j, 0]
                    + (verts[i0, 1] - b1) * cn[j, 1]
                    + (verts[i0, 2] - b2) * cn[j, 2]
                    + Bk * c * Nn * inv_q
                )
                b[j] = -Nn * inv_q
        face_dmin[k] = dmin
        face_dmax[k] = dmax

    m = _sorted_unique(dist, srt, dedup_tol)
    return m, srt[0], srt[m - 1]


@njit(cache=True)
def _precompute(geo, normal, base, volume, eps0, par_tol, dedup_tol):
    ws = _workspace(geo)
    m, s_min, s_max = _fill(geo, normal, base, eps0, par_tol, dedup_tol, ws)
    return (ws[0], ws[1], ws[2], ws[3], ws[4], ws[5], ws[6], ws[7], ws[8], ws[9][:m],
            s_min, s_max, s_max - s_min)


@njit(cache=True, _nrt=False)
def _cut_area(face_ptr, face_idx, face_next, edge_len, dist, slope, a, b, k, s, eps0):
    """Area of an intersected face below the plane, with two derivatives."""
    A = 0.0
    A1 = 0.0
    A2 = 0.0
    for j in range(face_ptr[k], face_ptr[k + 1]):
        di = dist[face_idx[j]]
        dj = dist[face_next[j]]
        st = _edge_status(_vertex_status(di - s, eps0), _vertex_status(dj - s, eps0))
        l, lp = _edge_length(st, di, dj, s, edge_len[j], slope[j])
        bj = b[j]
        coef = a[j] + s * bj
        A += coef * l
        A1 += coef * lp + bj * l
        A2 += bj * lp
    return 0.5 * A, 0.5 * A1, A2


@njit(cache=True, _nrt=False)
def _face_area(co, k, s):
    eps0 = co.eps0
    if co.face_dmin[k] - s > -eps0:
        return 0.0, 0.0, 0.0
    if co.face_dmax[k] - s <= -eps0:
        return co.geometry.face_area[k], 0.0, 0.0
    if co.sigma[k] != 0:
        return 0.0, 0.0, 0.0
    g = co.geometry
    return _cut_area(g.face_ptr, g.face_idx, g.face_next, g.edge_len, co.dist, co.slope,
                     co.a, co.b, k, s, eps0)


@njit(cache=True, _nrt=False)
def _truncate(co, s):
    eps0 = co.eps0
    V = 0.0
    V1 = 0.0
    V2 = 0.0
    V3 = 0.0
    # a single exit and locally unpacked arrays keep this loop cheap in numba
    if s > co.s_max + eps0:
        V = 3.0 * co.volume
    else:
        g = co.geometry
        face_ptr = g.face_ptr
        face_idx = g.face_idx
        face_next = g.face_next
        edge_len = g.edge_len
        full = g.face_area
        dist = co.dist
        slope = co.slope
        a = co.a
        b = co.b
        dmin = co.face_dmin
        dmax = co.face_dmax
        sigma = co.sigma
        B = co.B
        C = co.C
        for k in range(B.shape[0]):
            if dmin[k] - s > -eps0:
                continue
            if dmax[k] - s <= -eps0:
                A = full[k]
                A1 = 0.0
                A2 = 0.0
            elif sigma[k] != 0:
                continue
            else:
                A, A1, A2 = _cut_area(face_ptr, face_idx, face_next, edge_len, dist, slope,
                                      a, b, k, s, eps0)
            Ck = C[k]
            w = B[k] + s * Ck
            V += w * A
            V1 += w * A1 + Ck * A
            V2 += w * A2 + 2.0 * Ck * A1
            V3 += Ck * A2
    V = min(max(V / 3.0, 0.0), co.volume)
    return V, max(V1 / 3.0, 0.0), V2 / 3.0, V3


@njit(cache=True, _nrt=False)
def _bracket_index(brackets, s, eps0):
    i = np.searchsorted(brackets, s - eps0, side="right") - 1
    return min(max(i, 0), brackets.shape[0] - 2)


@njit(cache=True)
def _coefficients(geo, normal, base, volume, eps0, dedup_tol):
    out = _precompute(geo, normal, base, volume, eps0, PARALLEL_TOL, dedup_tol)
    return StaticCoefficients(geo, normal, base, out[0], out[1], out[2], out[3], out[4],
                              out[5], out[6], out[7], out[8], out[9], out[10], out[11],
                              out[12], volume, eps0)


@njit(cache=True, _nrt=False)
def _coefficients_view(geo, normal, base, volume, eps0, dedup_tol, ws):
    """
    As :func:`_coefficients`, but the arrays are views of workspace ``ws``.

    Compiled without reference counting: only call it from kernels that are
    likewise compiled with ``_nrt=False`` and keep ``ws`` alive.
    """
    m, s_min, s_max = _fill(geo, normal, base, eps0, PARALLEL_TOL, dedup_tol, ws)
    return StaticCoefficients(geo, normal, base, ws[0], ws[1], ws[2], ws[3], ws[4], ws[5],
                              ws[6], ws[7], ws[8], ws[9][:m], s_min, s_max, s_max - s_min,
                              volume, eps0)


def precompute(p: Polyhedron, normal, base=None, eps0=ZERO_TOL) -> StaticCoefficients:
    """
    Prepare static coefficients for plane normal ``normal``.

    ``base`` is the reference point x_b of the signed distance and defaults
    to the vertex centroid.
    """
    n = np.asarray(normal, dtype=np.float64)
    norm = np.linalg.norm(n)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("plane normal must be a finite non-zero vector")
    n = n / norm
    xb = p.centroid if base is None else np.asarray(base, dtype=np.float64)
    return _coefficients(p.geometry, n, xb.copy(), p.volume, eps0, eps0 * max(1.0, p.diameter))


def classify_vertex(x, frame: PlaneFrame, eps0=ZERO_TOL) -> int:
    return int(_vertex_status(float(frame.level(x)), eps0))


def classify_edge(si: int, sj: int) -> int:
    if si not in (-1, 0, 1) or sj not in (-1, 0, 1):
        raise ValueError("vertex status must be -1, 0 or 1")
    return int(_edge_status(si, sj))


def edge_length(k: int, m: int, s: float, coeffs: StaticCoefficients):
    """Length below the plane of edge ``m`` of face ``k`` and its slope."""
    geo = coeffs.geometry
    j = geo.face_ptr[k] + m
    if not geo.face_ptr[k] <= j < geo.face_ptr[k + 1]:
        raise IndexError(f"face {k} has no edge {m}")
    di = coeffs.dist[geo.face_idx[j]]
    dj = coeffs.dist[geo.face_next[j]]
    e = coeffs.eps0
    st = _edge_status(_vertex_status(di - s, e), _vertex_status(dj - s, e))
    l, lp = _edge_length(st, di, dj, s, geo.edge_len[j], coeffs.slope[j])
    return float(l), float(lp)


def face_area(k: int, s: float, coeffs: StaticCoefficients):
    """Area of face ``k`` below the plane and its first two derivatives."""
    return tuple(float(v) for v in _face_area(coeffs, k, float(s)))


def bracket_index(coeffs: StaticCoefficients, s: float) -> int:
    return int(_bracket_index(coeffs.brackets, float(s), coeffs.eps0))


def truncated_volume(coeffs: StaticCoefficients, s: float) -> VolumeSample:
    s = float(s)
    V, V1, V2, V3 = _truncate(coeffs, s)
    return VolumeSample(s, V, V1, V2, V3, bracket_index(coeffs, s))


def local_cubic(sample: VolumeSample) -> LocalCubic:
    """Taylor cubic around ``sample.s``; exact throughout the sample's bracket."""
    return LocalCubic(sample.s, sample.V, sample.dV, sample.d2V / 2.0, sample.d3V / 6.0)
