"""
Reference volumes for verification, independent of the face-based method.

``clip_convex_volume`` clips every face polygon against the half-space and
rebuilds the cap polygon from the intersection points (connectivity-based,
convex polyhedra only). ``monte_carlo_volume`` samples the bounding box and
classifies points by ray casting, which works for any closed polyhedron.
"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .polytope import Polyhedron, PolyhedronError
from .truncation import PlaneFrame

CONVEX_TOL = 1e-10
CHUNK = 1 << 18


class NotConvex(PolyhedronError):
    pass


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _polygon_area(pts, normal):
    """Goldman: signed area of a planar loop about ``normal``."""
    return 0.5 * float(normal @ np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0))


def check_convex(p: Polyhedron, tol=CONVEX_TOL):
    g = p.geometry
    x1 = p.vertices[g.face_idx[g.face_ptr[:-1]]]
    # signed distance of every vertex to every face plane
    excess = (p.vertices @ g.face_normal.T) - np.einsum("ij,ij->i", x1, g.face_normal)
    worst = float(excess.max())
    if worst > tol * p.diameter:
        raise NotConvex(f"a vertex lies {worst:.3e} outside a face plane")


def clip_convex_volume(p: Polyhedron, frame: PlaneFrame) -> float:
    """
    Volume of ``{x in P : level(x) <= 0}`` for convex ``P``.

    Raises
    ------
    NotConvex
    """
    check_convex(p)
    n = _unit(frame.normal)
    offset = float(np.asarray(frame.base, dtype=float) @ n) + frame.s
    c = p.centroid
    g = p.geometry
    volume = 0.0
    cap = []
    for k, face in enumerate(p.faces):
        pts = p.vertices[list(face)] - c
        lam = p.vertices[list(face)] @ n - offset
        kept = []
        for i in range(len(face)):
            j = (i + 1) % len(face)
            if lam[i] <= 0.0:
                kept.append(pts[i])
                if lam[i] == 0.0:
                    cap.append(pts[i])
            if (lam[i] < 0.0 < lam[j]) or (lam[j] < 0.0 < lam[i]):
                t = lam[i] / (lam[i] - lam[j])
                x = pts[i] + t * (pts[j] - pts[i])
                kept.append(x)
                cap.append(x)
        if len(kept) < 3:
            continue
        kept = np.array(kept)
        nf = g.face_normal[k]
        volume += float(kept[0] @ nf) * _polygon_area(kept, nf)

    if len(cap) >= 3:
        cap = np.array(cap)
        mid = cap.mean(axis=0)
        u = np.cross(n, [1.0, 0.0, 0.0] if abs(n[0]) < 0.9 else [0.0, 1.0, 0.0])
        u /= np.linalg.norm(u)
        w = np.cross(n, u)
        rel = cap - mid
        cap = cap[np.argsort(np.arctan2(rel @ w, rel @ u))]
        volume += float(mid @ n) * _polygon_area(cap, n)
    return volume / 3.0


# --- Monte Carlo ---------------------------------------------------------

_PHI = (1.0 + math.sqrt(5.0)) / 2.0


def ray_direction(k: int) -> np.ndarray:
    """Deterministic ray directions; ``k = 0`` is the default irrational one."""
    if k == 0:
        d = np.array([1.0, math.sqrt(2.0) - 1.0, math.pi - 3.0])
    else:
        a = 2.0 * math.pi * ((k * _PHI) % 1.0)
        z = 1.0 - 2.0 * ((k * math.sqrt(3.0)) % 1.0)
        r = math.sqrt(max(0.0, 1.0 - z * z))
        d = np.array([r * math.cos(a), r * math.sin(a), z])
    return d / np.linalg.norm(d)


_DIRECTIONS = np.array([ray_direction(k) for k in range(64)])


@njit(cache=True, _nrt=False)
def _winding(x, d, verts, face_ptr, face_idx, face_normal, face_off, drop, box, tol):
    """
    Signed crossing count of the ray ``x + t d``, ``t > 0``, with the faces.

    Returns -1000 if the ray grazes an edge or the start point lies on a
    face; the caller then retries with another direction.
    """
    wn = 0
    for k in range(face_ptr.shape[0] - 1):
        nf = face_normal[k]
        den = d[0] * nf[0] + d[1] * nf[1] + d[2] * nf[2]
        if abs(den) < 1e-12:
            continue
        t = (face_off[k] - (x[0] * nf[0] + x[1] * nf[1] + x[2] * nf[2])) / den
        if abs(t) < tol:
            return -1000
        if t < 0.0:
            continue
        ax = drop[k]
        i0 = 1 if ax == 0 else 0
        i1 = 1 if ax == 2 else 2
        py = x[i0] + t * d[i0]
        pz = x[i1] + t * d[i1]
        if py < box[k, 0] - tol or py > box[k, 1] + tol or pz < box[k, 2] - tol or pz > box[k, 3] + tol:
            continue
        inside = False
        lo = face_ptr[k]
        hi = face_ptr[k + 1]
        for j in range(lo, hi):
            a = verts[face_idx[j]]
            b = verts[face_idx[j + 1 if j + 1 < hi else lo]]
            ay, az = a[i0], a[i1]
            by, bz = b[i0], b[i1]
            ey = by - ay
            ez = bz - az
            ll = ey * ey + ez * ez
            wy = py - ay
            wz = pz - az
            u = (wy * ey + wz * ez) / ll
            cr = ey * wz - ez * wy
            if cr * cr < tol * tol * ll and -1e-9 <= u <= 1.0 + 1e-9:
                return -1000
            if (az > pz) != (bz > pz):
                yc = ay + (pz - az) * ey / ez
                if py < yc:
                    inside = not inside
        if inside:
            wn += 1 if den > 0.0 else -1
    return wn


@njit(cache=True, _nrt=False)
def _inside_mask(pts, verts, face_ptr, face_idx, face_normal, face_off, drop, box, tol, dirs, out):
    for i in range(pts.shape[0]):
        out[i] = False
        x = pts[i]
        for r in range(dirs.shape[0]):
            wn = _winding(x, dirs[r], verts, face_ptr, face_idx, face_normal, face_off, drop, box,
                          tol)
            if wn != -1000:
                out[i] = wn != 0
                break


@njit(cache=True, _nrt=False)
def _count_below(pts, inside, normals, offsets, counts):
    for i in range(pts.shape[0]):
        if not inside[i]:
            continue
        x = pts[i]
        for f in range(normals.shape[0]):
            n = normals[f]
            if x[0] * n[0] + x[1] * n[1] + x[2] * n[2] - offsets[f] <= 0.0:
                counts[f] += 1


def _sampler(p: Polyhedron, n_samples, seed):
    rng = np.random.default_rng(seed)
    lo = p.vertices.min(axis=0)
    span = p.vertices.max(axis=0) - lo
    done = 0
    while done < n_samples:
        m = min(CHUNK, n_samples - done)
        yield lo + span * rng.random((m, 3))
        done += m


def monte_carlo_volumes(p: Polyhedron, frames, n_samples=10**7, seed=42):
    """
    Monte Carlo truncated volumes for several planes from one sample set.

    Points are uniform in the axis-aligned bounding box; a point counts if it
    is inside ``p`` (ray casting) and ``level(x) <= 0``.
    """
    n_samples = int(n_samples)
    if n_samples < 10**4:
        raise ValueError("need at least 1e4 samples")
    frames = list(frames)
    normals = np.array([_unit(f.normal) for f in frames]).reshape(-1, 3)
    offsets = np.array(
        [float(np.asarray(f.base, dtype=float) @ n) + f.s for f, n in zip(frames, normals)]
    )
    g = p.geometry
    face_off = np.einsum("ij,ij->i", p.vertices[g.face_idx[g.face_ptr[:-1]]], g.face_normal)
    drop = np.abs(g.face_normal).argmax(axis=1).astype(np.int64)
    # per-face bounding box in the two coordinates kept by the projection
    box = np.empty((p.n_faces, 4))
    for k, face in enumerate(p.faces):
        keep = [i for i in range(3) if i != drop[k]]
        q = p.vertices[list(face)][:, keep]
        box[k] = q[:, 0].min(), q[:, 0].max(), q[:, 1].min(), q[:, 1].max()
    tol = 1e-12 * p.diameter
    counts = np.zeros(len(frames), dtype=np.int64)
    for pts in _sampler(p, n_samples, seed):
        inside = np.empty(len(pts), dtype=np.bool_)
        _inside_mask(pts, g.verts, g.face_ptr, g.face_idx, g.face_normal, face_off, drop, box,
                     tol, _DIRECTIONS, inside)
        _count_below(pts, inside, normals, offsets, counts)

    box = float(np.prod(p.vertices.max(axis=0) - p.vertices.min(axis=0)))
    out = []
    for c in counts:
        q = c / n_samples
        sd = math.sqrt(q * (1.0 - q) * n_samples / (n_samples - 1))
        out.append(McEstimate(box * q, box * sd / math.sqrt(n_samples), n_samples))
    return out


def monte_carlo_volume(p: Polyhedron, frame: PlaneFrame, n_samples=10**7, seed=42) -> McEstimate:
    """Monte Carlo estimate of the volume of ``p`` below the plane of ``frame``."""
    return monte_carlo_volumes(p, [frame], n_samples, seed)[0]
