"""
Polyhedron data model.

A polyhedron is a shared vertex list plus one ordered index loop per face,
counter-clockwise with respect to the outward face normal. A hole in a face
is a second, coplanar face with inverted orientation. No edge list is stored.
"""
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

EPS_PLANAR = 1e-9
EPS_CLOSURE = 1e-12
EPS_AREA = 1e-14


class PolyhedronError(ValueError):
    pass


class NonPlanarFace(PolyhedronError):
    pass


class DegenerateFace(PolyhedronError):
    pass


class OpenSurface(PolyhedronError):
    pass


class IndexOutOfRange(PolyhedronError):
    pass


class FaceGeometry(NamedTuple):
    """Derived per-face quantities of one face."""

    normal: np.ndarray  # (3,) outward unit normal
    x_ref: np.ndarray  # (3,) first vertex of the loop
    conormals: np.ndarray  # (m, 3) outward in-plane edge normals
    area: float


class Geometry(NamedTuple):
    """Flat face/half-edge arrays consumed by the compiled kernels.

    Half-edge ``j`` of face ``k`` (``face_ptr[k] <= j < face_ptr[k+1]``)
    runs from vertex ``face_idx[j]`` to vertex ``face_next[j]``.
    """

    verts: np.ndarray
    face_ptr: np.ndarray
    face_idx: np.ndarray
    face_next: np.ndarray
    face_normal: np.ndarray
    face_area: np.ndarray
    conormal: np.ndarray
    edge_len: np.ndarray


@dataclass(frozen=True, eq=False)
class Polyhedron:
    vertices: np.ndarray
    faces: tuple
    geometry: Geometry = field(repr=False)
    volume: float
    diameter: float

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        """Number of distinct undirected edges (counted, never stored)."""
        return len({frozenset(e) for f in self.faces for e in zip(f, f[1:] + f[:1])})

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    def face(self, k) -> FaceGeometry:
        g = self.geometry
        lo, hi = g.face_ptr[k], g.face_ptr[k + 1]
        return FaceGeometry(
            g.face_normal[k],
            self.vertices[g.face_idx[lo]],
            g.conormal[lo:hi],
            float(g.face_area[k]),
        )

    def vector_area(self):
        g = self.geometry
        return (g.face_area[:, None] * g.face_normal).sum(axis=0)


def _newell(points):
    """Vector area of a closed planar loop (Newell's method)."""
    p = points - points[0]
    return 0.5 * np.cross(p, np.roll(p, -1, axis=0)).sum(axis=0)


def build(
    vertices,
    faces: Sequence[Sequence[int]],
    eps_planar=EPS_PLANAR,
    eps_closure=EPS_CLOSURE,
) -> Polyhedron:
    """
    Validate a vertex/face description and derive per-face geometry.

    Parameters
    ----------
    vertices : (n, 3) array_like
    faces : sequence of index loops, CCW with respect to the outward normal
    eps_planar : float
      Maximum point-to-face-plane distance, relative to the bounding-box
      diagonal.
    eps_closure : float
      Maximum norm of the vector-area sum, relative to the squared diagonal.

    Raises
    ------
    IndexOutOfRange, DegenerateFace, NonPlanarFace, OpenSurface
    """
    verts = np.ascontiguousarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) == 0:
        raise PolyhedronError("vertices must be a non-empty (n, 3) array")
    faces = tuple(tuple(int(i) for i in f) for f in faces)
    if not faces:
        raise PolyhedronError("no faces given")

    nv = len(verts)
    h = float(np.linalg.norm(verts.max(axis=0) - verts.min(axis=0)))
    if h == 0.0:
        raise DegenerateFace("all vertices coincide")

    sizes = np.array([len(f) for f in faces], dtype=np.int64)
    face_ptr = np.zeros(len(faces) + 1, dtype=np.int64)
    np.cumsum(sizes, out=face_ptr[1:])
    n_he = int(face_ptr[-1])
    face_idx = np.empty(n_he, dtype=np.int64)
    face_next = np.empty(n_he, dtype=np.int64)
    face_normal = np.empty((len(faces), 3))
    face_area = np.empty(len(faces))
    conormal = np.empty((n_he, 3))
    edge_len = np.empty(n_he)

    for k, f in enumerate(faces):
        if len(f) < 3:
            raise DegenerateFace(f"face {k} has {len(f)} vertices")
        if min(f) < 0 or max(f) >= nv:
            raise IndexOutOfRange(f"face {k} references a vertex outside 0..{nv - 1}")
        lo = face_ptr[k]
        idx = np.asarray(f, dtype=np.int64)
        face_idx[lo : lo + len(f)] = idx
        face_next[lo : lo + len(f)] = np.roll(idx, -1)

        pts = verts[idx]
        va = _newell(pts)
        area = float(np.linalg.norm(va))
        if area <= EPS_AREA * h * h:
            raise DegenerateFace(f"face {k} has zero area")
        n = va / area
        residual = np.abs((pts - pts[0]) @ n).max()
        if residual > eps_planar * h:
            raise NonPlanarFace(
                f"face {k} deviates {residual:.3e} from its plane (limit {eps_planar * h:.3e})"
            )
        e = np.roll(pts, -1, axis=0) - pts
        lengths = np.linalg.norm(e, axis=1)
        if lengths.min() <= EPS_AREA * h:
            raise DegenerateFace(f"face {k} has a zero-length edge")
        cn = np.cross(e, n)
        cn /= np.linalg.norm(cn, axis=1)[:, None]

        face_normal[k] = n
        face_area[k] = area
        conormal[lo : lo + len(f)] = cn
        edge_len[lo : lo + len(f)] = lengths

    closure = np.linalg.norm((face_area[:, None] * face_normal).sum(axis=0))
    if closure > eps_closure * h * h:
        raise OpenSurface(f"vector-area sum {closure:.3e} does not vanish")

    center = verts.mean(axis=0)
    heights = np.einsum("ij,ij->i", verts[face_idx[face_ptr[:-1]]] - center, face_normal)
    volume = float((heights * face_area).sum() / 3.0)
    if not volume > 0.0:
        raise OpenSurface(f"enclosed volume {volume:.3e} is not positive; check orientation")

    geometry = Geometry(verts, face_ptr, face_idx, face_next, face_normal, face_area, conormal, edge_len)
    return Polyhedron(verts, faces, geometry, volume, h)


def total_volume(p: Polyhedron) -> float:
    return p.volume


def transformed(p: Polyhedron, rotation=None, translation=None) -> Polyhedron:
    """Return a rigidly moved copy of ``p``."""
    v = p.vertices
    if rotation is not None:
        v = v @ np.asarray(rotation).T
    if translation is not None:
        v = v + np.asarray(translation)
    return build(v, p.faces)
