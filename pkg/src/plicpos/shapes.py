"""Builders for the benchmark polyhedra and OFF-style file I/O."""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .polytope import EPS_PLANAR, Polyhedron, PolyhedronError, build


class ParseError(PolyhedronError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class CuboidSpec:
    psi1: float = 1.0
    psi2: float = 1.0

    def __post_init__(self):
        if not (self.psi1 > 0 and self.psi2 > 0):
            raise ValueError("cuboid edge ratios must be positive")


@dataclass(frozen=True)
class TorusSpec:
    R: float = 1.0
    gamma: float = 0.5
    n1: int = 9
    n2: int = 7

    def __post_init__(self):
        if self.n1 < 3 or self.n2 < 3:
            raise ValueError("torus needs at least 3 nodes in each direction")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("minor radius ratio must lie in (0, 1)")
        if not self.R > 0:
            raise ValueError("major radius must be positive")


_BOX_FACES = (
    (0, 3, 2, 1),  # z = 0
    (4, 5, 6, 7),  # z = 1
    (0, 1, 5, 4),  # y = 0
    (2, 3, 7, 6),  # y = 1
    (0, 4, 7, 3),  # x = 0
    (1, 2, 6, 5),  # x = 1
)


def make_cuboid(spec: CuboidSpec = CuboidSpec()) -> Polyhedron:
    """Box with edges ``1, psi1, psi2`` along x, y, z and a corner at the origin."""
    x, y, z = 1.0, spec.psi1, spec.psi2
    verts = [
        (0, 0, 0), (x, 0, 0), (x, y, 0), (0, y, 0),
        (0, 0, z), (x, 0, z), (x, y, z), (0, y, z),
    ]
    return build(verts, _BOX_FACES)


def make_unit_cube() -> Polyhedron:
    return make_cuboid(CuboidSpec())


def make_unit_tetrahedron() -> Polyhedron:
    verts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    faces = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)]
    return build(verts, faces)


def make_dodecahedron() -> Polyhedron:
    """Regular dodecahedron with unit edge length, centred at the origin."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [(i, j, k) for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)]
    for a in (-1, 1):
        for b in (-1, 1):
            verts += [(0, a / phi, b * phi), (a / phi, b * phi, 0), (b * phi, 0, a / phi)]
    verts = np.array(verts, dtype=float) * (phi / 2.0)

    centers = []
    for a in (-1, 1):
        for b in (-1, 1):
            centers += [(0, a * phi, b), (a, 0, b * phi), (a * phi, b, 0)]
    faces = []
    for c in np.array(centers, dtype=float):
        c /= np.linalg.norm(c)
        proj = verts @ c
        ring = np.flatnonzero(proj > proj.max() - 1e-9)
        # order the five vertices counter-clockwise about the outward axis
        u = np.cross(c, [0.0, 0.0, 1.0] if abs(c[2]) < 0.9 else [1.0, 0.0, 0.0])
        u /= np.linalg.norm(u)
        w = np.cross(c, u)
        rel = verts[ring] - proj[ring].mean() * c
        order = np.argsort(np.arctan2(rel @ w, rel @ u))
        faces.append(tuple(int(i) for i in ring[order]))
    return build(verts, faces)


def torus_vertices(spec: TorusSpec) -> np.ndarray:
    i = np.arange(1, spec.n1 + 1)
    j = np.arange(1, spec.n2 + 1)
    phi = 2.0 * np.pi * i / spec.n1
    theta = 2.0 * np.pi * j / spec.n2
    ring = 1.0 + spec.gamma * np.cos(theta)
    x = np.outer(np.cos(phi), ring)
    y = np.outer(np.sin(phi), ring)
    z = np.broadcast_to(spec.gamma * np.sin(theta), x.shape)
    return spec.R * np.stack([x, y, z], axis=-1).reshape(-1, 3)


def _planarity_residual(pts):
    p = pts - pts[0]
    n = 0.5 * np.cross(p, np.roll(p, -1, axis=0)).sum(axis=0)
    n /= np.linalg.norm(n)
    return float(np.abs(p @ n).max())


def make_torus(spec: TorusSpec = TorusSpec(), strict_table1=False) -> Polyhedron:
    """
    Torus with ``n1 * n2`` vertices on the parametric surface.

    Each grid cell becomes one quadrilateral. A quad whose planarity residual
    exceeds the build tolerance is split along its shorter diagonal, unless
    ``strict_table1`` is set, in which case quads are always kept and the
    planarity tolerance is relaxed to admit them.
    """
    verts = torus_vertices(spec)
    n1, n2 = spec.n1, spec.n2
    h = float(np.linalg.norm(verts.max(axis=0) - verts.min(axis=0)))

    def vid(i, j):
        return (i % n1) * n2 + (j % n2)

    faces = []
    worst = 0.0
    for i in range(n1):
        for j in range(n2):
            quad = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
            res = _planarity_residual(verts[list(quad)])
            worst = max(worst, res)
            if strict_table1 or res <= EPS_PLANAR * h:
                faces.append(quad)
                continue
            q0, q1, q2, q3 = quad
            if np.linalg.norm(verts[q0] - verts[q2]) <= np.linalg.norm(verts[q1] - verts[q3]):
                faces += [(q0, q1, q2), (q0, q2, q3)]
            else:
                faces += [(q0, q1, q3), (q1, q2, q3)]
    eps = max(EPS_PLANAR, 2.0 * worst / h) if strict_table1 else EPS_PLANAR
    return build(verts, faces, eps_planar=eps)


LETTER_A_OUTER = ((0, 0), (4, 0), (6, 4), (8, 4), (10, 0), (14, 0), (10, 14), (8, 14))
LETTER_A_HOLE = ((6, 6), (8, 6), (7, 8))
LETTER_A_DEPTH = 5


def make_letter_a() -> Polyhedron:
    """
    Prism over the letter-A profile, scaled by 1/14, with a triangular hole.

    Front (z = 0) and back (z = 5/14) are each an outer face plus a coplanar
    hole face of opposite orientation.
    """
    no, nh = len(LETTER_A_OUTER), len(LETTER_A_HOLE)
    profile = LETTER_A_OUTER + LETTER_A_HOLE
    verts = [(x, y, 0) for x, y in profile] + [(x, y, LETTER_A_DEPTH) for x, y in profile]
    verts = np.array(verts, dtype=float) / 14.0
    nprof = no + nh
    outer = list(range(no))
    hole = list(range(no, nprof))

    def back(ids):
        return [i + nprof for i in ids]

    faces = [
        tuple(outer[::-1]),  # front, normal -z
        tuple(hole),  # front hole, normal +z
        tuple(back(outer)),  # back, normal +z
        tuple(back(hole[::-1])),  # back hole, normal -z
    ]
    for m in range(no):
        a, b = outer[m], outer[(m + 1) % no]
        faces.append((a, b, b + nprof, a + nprof))
    for m in range(nh):
        a, b = hole[m], hole[(m + 1) % nh]
        faces.append((a, a + nprof, b + nprof, b))
    return build(verts, faces)


SHAPES = {
    "cube": make_unit_cube,
    "cuboid": make_cuboid,
    "tetra": make_unit_tetrahedron,
    "dodeca": make_dodecahedron,
    "torus": make_torus,
    "letterA": make_letter_a,
}


def load_off(path) -> Polyhedron:
    """Read the OFF-style format: ``NV NF``, NV vertex lines, NF face lines."""
    lines = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if text and text != "OFF":
            lines.append((lineno, text.split()))
    if not lines:
        raise ParseError("empty file")
    lineno, head = lines[0]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise ParseError("expected 'NV NF' header", lineno) from None
    if len(lines) < 1 + nv + nf:
        raise ParseError(f"expected {nv} vertices and {nf} faces", lines[-1][0])

    verts = np.empty((nv, 3))
    for row, (lineno, tok) in enumerate(lines[1 : 1 + nv]):
        try:
            if len(tok) != 3:
                raise ValueError
            verts[row] = [float(t) for t in tok]
        except ValueError:
            raise ParseError("expected 'x y z'", lineno) from None

    faces = []
    for lineno, tok in lines[1 + nv : 1 + nv + nf]:
        try:
            n = int(tok[0])
            idx = [int(t) for t in tok[1:]]
        except (ValueError, IndexError):
            raise ParseError("expected 'n i1 ... in'", lineno) from None
        if len(idx) != n:
            raise ParseError(f"face declares {n} indices but lists {len(idx)}", lineno)
        if min(idx) < 0 or max(idx) >= nv:
            raise ParseError(f"face index out of range 0..{nv - 1}", lineno)
        faces.append(idx)
    return build(verts, faces)


def save_off(p: Polyhedron, path):
    out = [f"{p.n_vertices} {p.n_faces}"]
    out += [" ".join(f"{c:.17g}" for c in v) for v in p.vertices]
    out += [" ".join(str(i) for i in (len(f), *f)) for f in p.faces]
    Path(path).write_text("\n".join(out) + "\n")


def load_shape(name: str, **kwargs) -> Polyhedron:
    """Resolve a CLI shape name, including ``file:<path>``."""
    if name.startswith("file:"):
        return load_off(name[5:])
    try:
        builder = SHAPES[name]
    except KeyError:
        raise ValueError(f"unknown shape {name!r}; choose from {', '.join(SHAPES)} or file:<path>") from None
    return builder(**kwargs)
